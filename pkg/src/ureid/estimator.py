"""scikit-learn style front door for the training pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .dataset import Dataset, Instance, TRAIN
from .encoder import Encoder, INIT_PCA, INIT_UNIFORM, LINEAR, FREE
from .errors import InvalidConfigError
from .numerics import spawn_rng
from .trainer import TrainConfig, train


class ClusterContrastEmbedding(BaseEstimator, ClusterMixin):
    """Learn unit-norm embeddings from unlabeled feature vectors.

    Alternates density clustering over a feature memory with contrastive
    training against per-cluster classifiers. ``fit`` consumes a feature
    matrix and a parallel camera-id vector; no identity labels are used.

    Parameters mirror TrainConfig plus the encoder choice. After ``fit``:

    Attributes
    ----------
    encoder_ : Encoder
        The trained encoder.
    labels_ : ndarray of shape (n_samples,)
        Final pseudo-labels over the training data (-1 marks outliers).
    reports_ : list of EpochReport
        Per-epoch cluster counts, accuracy (nan without ground truth), loss.
    embeddings_ : ndarray of shape (n_samples, embedding_dim)
        Final instance-memory rows for the training data.
    n_features_in_ : int
    """

    def __init__(self, embedding_dim=32, encoder_kind=LINEAR, encoder_init=INIT_UNIFORM,
                 variant="stochastic_online", epochs=80, centroid_fraction=1.0,
                 use_temporal=True, use_camera_offset=True, cam_weight=1.0,
                 cluster_momentum=0.2, instance_momentum=0.2, temperature=0.04,
                 eps=0.5, min_samples=4, distance_mode="softmax_relative",
                 learning_rate=0.00035, P=16, K=4, random_state=0):
        self.embedding_dim = embedding_dim
        self.encoder_kind = encoder_kind
        self.encoder_init = encoder_init
        self.variant = variant
        self.epochs = epochs
        self.centroid_fraction = centroid_fraction
        self.use_temporal = use_temporal
        self.use_camera_offset = use_camera_offset
        self.cam_weight = cam_weight
        self.cluster_momentum = cluster_momentum
        self.instance_momentum = instance_momentum
        self.temperature = temperature
        self.eps = eps
        self.min_samples = min_samples
        self.distance_mode = distance_mode
        self.learning_rate = learning_rate
        self.P = P
        self.K = K
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            variant=self.variant, epochs=self.epochs,
            centroid_fraction=self.centroid_fraction, use_temporal=self.use_temporal,
            use_camera_offset=self.use_camera_offset, cam_weight=self.cam_weight,
            cluster_momentum=self.cluster_momentum, instance_momentum=self.instance_momentum,
            temperature=self.temperature, eps=self.eps, min_samples=self.min_samples,
            distance_mode=self.distance_mode, learning_rate=self.learning_rate,
            P=self.P, K=self.K, seed=self.random_state,
        )

    def fit(self, X, y=None, cameras=None):
        """Fit on raw features X with per-row camera ids. y is ignored."""
        X = check_array(X, dtype=np.float64)
        if cameras is None:
            raise InvalidConfigError("fit requires cameras=<array of per-row camera ids>")
        cameras = np.asarray(cameras, dtype=np.int64)
        if cameras.shape != (X.shape[0],):
            raise InvalidConfigError(
                f"cameras shape {cameras.shape} does not match X rows {X.shape[0]}")
        if cameras.min() < 0:
            raise InvalidConfigError("camera ids must be non-negative")
        # camera ids must be contiguous so the offset matrix has no dead rows
        n_cam = int(cameras.max()) + 1
        present = np.unique(cameras)
        if present.size != n_cam:
            missing = sorted(set(range(n_cam)) - set(present.tolist()))
            raise InvalidConfigError(f"camera ids must be contiguous; missing {missing}")

        self.n_features_in_ = X.shape[1]
        instances = [Instance(index=i, raw=X[i], camera=int(cameras[i]), identity=-1)
                     for i in range(X.shape[0])]
        ds = Dataset(instances=instances, n_cam=n_cam, input_dim=X.shape[1],
                     split=[TRAIN] * X.shape[0], seed=self.random_state)

        encoder = build_encoder(self.encoder_kind, self.encoder_init, X, len(ds),
                                self.embedding_dim, self.random_state)
        result = train(ds, encoder, self._train_config())
        self.encoder_ = result.encoder
        self.reports_ = result.reports
        self.labels_ = result.final_labeling.labels.copy()
        self.embeddings_ = result.instance_memory.feats.copy()
        return self

    def transform(self, X):
        """Embed rows of X with the trained encoder (linear kind only)."""
        if not hasattr(self, "encoder_"):
            raise InvalidConfigError("transform called before fit")
        if self.encoder_.kind != LINEAR:
            raise InvalidConfigError(
                "transform is only defined for the linear encoder; "
                "free_embedding rows live in embeddings_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidConfigError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        feats, _ = self.encoder_.forward_batch(X, np.arange(X.shape[0]))
        return feats


def build_encoder(kind: str, init: str, raws: np.ndarray, num_instances: int,
                  embedding_dim: int, seed: int) -> Encoder:
    """Shared encoder construction for the estimator and the CLI."""
    if kind == LINEAR:
        if init == INIT_PCA:
            return Encoder.linear_pca(raws, embedding_dim)
        if init == INIT_UNIFORM:
            return Encoder.linear(raws.shape[1], embedding_dim, spawn_rng(seed, "encoder"))
        raise InvalidConfigError(f"encoder_init must be 'uniform' or 'pca', got {init!r}")
    if kind == FREE:
        return Encoder.free_embedding(num_instances, embedding_dim, spawn_rng(seed, "encoder"))
    raise InvalidConfigError(f"encoder kind must be 'linear' or 'free_embedding', got {kind!r}")
