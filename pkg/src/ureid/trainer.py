"""The alternating cluster / train loop.

Per epoch:
  1. cosine similarities over the instance bank V;
  2. optional camera-offset correction, then a distance matrix;
  3. DBSCAN pseudo-labels (an all-outlier epoch skips training but still
     refreshes V);
  4. cluster bank M seeded with one random member row per cluster;
  5. P-K batches over the clusters. Per batch: forward, contrastive loss
     against a classifier bank frozen at batch start, gradient accumulation,
     one Adam step, then the variant's classifier update followed by the
     instance-bank update, both in sample order using the embeddings computed
     before the step;
  6. end of epoch: outlier rows of V are refreshed with a fresh forward pass.

Classifier banks by variant:
  baseline            unit-mean centroid per cluster, recomputed every batch
  percent_mean        centroid of a random centroid_fraction subset per batch
  stochastic_random   M; updated with a random member's V row per sample
  stochastic_online   M; updated with the sample's own fresh embedding
  hard                M; updated once per (batch, cluster) with the batch
                      member least similar to that cluster's classifier row

The instance bank follows use_temporal: momentum blend when on, plain
replacement when off. All randomness comes from streams derived from
cfg.seed, so identical config + seed reproduces identical results bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .clustering import DbscanParams, PseudoLabeling, clustering_accuracy, dbscan
from .dataset import Dataset, TRAIN
from .distance import (MODES, SOFTMAX_RELATIVE, camera_offsets, plain_distance,
                       unified_distance)
from .encoder import Encoder, OptimConfig
from .errors import InvalidConfigError
from .loss import LossConfig, batch_loss
from .memory import ClusterMemory, InstanceMemory, centroid
from .numerics import pairwise_similarity, spawn_rng
from .sampler import SamplerConfig, epoch_batches

VARIANTS = ("baseline", "stochastic_random", "stochastic_online", "hard", "percent_mean")
MEAN_VARIANTS = ("baseline", "percent_mean")


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "stochastic_online"
    epochs: int = 80
    centroid_fraction: float = 1.0        # percent_mean subset size (1.0 = full mean)
    use_temporal: bool = True             # momentum-blend V vs replace
    use_camera_offset: bool = True        # camera-aware distance vs plain 1 - cos
    cam_weight: float = 1.0               # scale on the subtracted offset
    cluster_momentum: float = 0.2         # M update rate
    instance_momentum: float = 0.2        # V update rate
    temperature: float = 0.04
    eps: float = 0.5
    min_samples: int = 4
    distance_mode: str = SOFTMAX_RELATIVE
    learning_rate: float = 0.00035
    P: int = 16
    K: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"train.variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.epochs < 1:
            raise InvalidConfigError(f"train.epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.centroid_fraction <= 1.0:
            raise InvalidConfigError(
                f"train.centroid_fraction must be in (0, 1], got {self.centroid_fraction}")
        for name in ("cluster_momentum", "instance_momentum"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfigError(f"train.{name} must be in [0, 1], got {value}")
        if self.temperature <= 0:
            raise InvalidConfigError(f"train.temperature must be > 0, got {self.temperature}")
        if self.cam_weight < 0:
            raise InvalidConfigError(f"train.cam_weight must be >= 0, got {self.cam_weight}")
        if self.distance_mode not in MODES:
            raise InvalidConfigError(
                f"train.distance_mode must be one of {MODES}, got {self.distance_mode!r}")
        if self.seed < 0:
            raise InvalidConfigError(f"train.seed must be >= 0, got {self.seed}")
        DbscanParams(self.eps, self.min_samples).validate()
        SamplerConfig(self.P, self.K).validate()
        LossConfig(self.temperature).validate()


@dataclass
class EpochReport:
    epoch: int
    num_clusters: int
    num_outliers: int
    clustering_acc: float  # nan when no ground truth or no clusters
    mean_loss: float       # nan for an all-outlier epoch
    seconds: float


@dataclass
class TrainResult:
    encoder: Encoder
    reports: list[EpochReport]
    instance_memory: InstanceMemory
    final_labeling: PseudoLabeling
    final_clustering_acc: float


EPOCH_CSV_HEADER = "epoch,Y,outliers,clu_acc,loss"


def reports_to_csv(reports: list[EpochReport]) -> str:
    """Deterministic CSV of per-epoch stats (wall time deliberately excluded)."""
    lines = [EPOCH_CSV_HEADER]
    for r in reports:
        lines.append(f"{r.epoch},{r.num_clusters},{r.num_outliers},"
                     f"{r.clustering_acc!r},{r.mean_loss!r}")
    return "\n".join(lines) + "\n"


def _cluster_step(feats: np.ndarray, cameras: np.ndarray, n_cam: int,
                  cfg: TrainConfig) -> PseudoLabeling:
    sim = pairwise_similarity(feats)
    if cfg.use_camera_offset:
        offsets = camera_offsets(sim, cameras, n_cam)
        dist = unified_distance(sim, offsets, cameras, cfg.cam_weight, cfg.distance_mode)
    else:
        dist = plain_distance(sim)
    return dbscan(dist, DbscanParams(cfg.eps, cfg.min_samples))


def _mean_classifiers(V: InstanceMemory, labeling: PseudoLabeling, fraction: float,
                      rng: np.random.Generator) -> np.ndarray:
    rows = [centroid(V.feats, labeling.members(j), fraction, rng)
            for j in range(labeling.num_clusters)]
    return np.stack(rows)


def _classifier_update(cfg: TrainConfig, M: ClusterMemory, V: InstanceMemory,
                       labeling: PseudoLabeling, targets: np.ndarray,
                       embeddings: np.ndarray, classifiers: np.ndarray,
                       rng: np.random.Generator) -> None:
    if cfg.variant == "stochastic_online":
        for i in range(targets.size):
            M.update(int(targets[i]), embeddings[i])
    elif cfg.variant == "stochastic_random":
        for i in range(targets.size):
            members = labeling.members(int(targets[i]))
            pick = members[int(rng.integers(members.size))]
            M.update(int(targets[i]), V.feats[pick])
    elif cfg.variant == "hard":
        for y in np.unique(targets):
            rows = np.flatnonzero(targets == y)
            sims = embeddings[rows] @ classifiers[y]
            M.update(int(y), embeddings[rows[int(np.argmin(sims))]])
    # mean variants keep no cluster bank


def train(ds: Dataset, encoder: Encoder, cfg: TrainConfig,
          trace: list | None = None) -> TrainResult:
    """Run the loop on the dataset's train split. Mutates and returns the encoder.

    ``trace``, when given, collects one dict per processed batch with the
    classifier bank and indices actually used (for tests and diagnostics).
    """
    cfg.validate()
    view = ds.train_view()
    n = len(view)
    if n == 0:
        raise InvalidConfigError("train split is empty")
    raws = view.raws
    cameras = view.cameras
    indices = view.dataset_indices
    truth = ds.identities(ds.subset(TRAIN))
    has_truth = bool(np.all(truth >= 0))

    rng_init = spawn_rng(cfg.seed, "cluster-init")
    rng_sampler = spawn_rng(cfg.seed, "sampler")
    rng_variant = spawn_rng(cfg.seed, "variant")
    optim = OptimConfig(learning_rate=cfg.learning_rate)
    loss_cfg = LossConfig(cfg.temperature)
    sampler_cfg = SamplerConfig(cfg.P, cfg.K)

    V = InstanceMemory.from_encoder(encoder, raws, indices, cfg.instance_momentum)
    reports: list[EpochReport] = []

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        labeling = _cluster_step(V.feats, cameras, ds.n_cam, cfg)
        n_out = n - labeling.num_clustered
        acc = (clustering_accuracy(labeling, truth)
               if has_truth and labeling.num_clusters > 0 else float("nan"))

        if labeling.num_clusters == 0:
            # nothing to train on this epoch; bring the whole bank up to date
            V.refresh(encoder, raws, indices, np.arange(n))
            reports.append(EpochReport(epoch, 0, n_out, acc, float("nan"),
                                       time.perf_counter() - t0))
            continue

        M = ClusterMemory.from_instances(V, labeling, rng_init, cfg.cluster_momentum)
        loss_sum = 0.0
        sample_count = 0
        for batch in epoch_batches(labeling, cameras, sampler_cfg, rng_sampler):
            if cfg.variant in MEAN_VARIANTS:
                fraction = 1.0 if cfg.variant == "baseline" else cfg.centroid_fraction
                classifiers = _mean_classifiers(V, labeling, fraction, rng_variant)
            else:
                classifiers = M.feats.copy()  # frozen for this batch's loss

            embeddings, norms = encoder.forward_batch(raws[batch], indices[batch])
            targets = labeling.labels[batch]
            losses, grads = batch_loss(embeddings, targets, classifiers, loss_cfg)
            grad_theta = encoder.batch_grad(raws[batch], indices[batch],
                                            embeddings, norms, grads)
            grad_theta /= batch.size
            encoder.adam_step(grad_theta, optim)

            _classifier_update(cfg, M, V, labeling, targets, embeddings,
                               classifiers, rng_variant)
            for i in range(batch.size):
                if cfg.use_temporal:
                    V.update(int(batch[i]), embeddings[i])
                else:
                    V.replace(int(batch[i]), embeddings[i])

            loss_sum += float(losses.sum())
            sample_count += batch.size
            if trace is not None:
                trace.append({"epoch": epoch, "batch": batch.copy(),
                              "classifiers": classifiers, "targets": targets.copy()})

        V.refresh(encoder, raws, indices, labeling.outliers())
        reports.append(EpochReport(epoch, labeling.num_clusters, n_out, acc,
                                   loss_sum / sample_count, time.perf_counter() - t0))

    final_labeling = _cluster_step(V.feats, cameras, ds.n_cam, cfg)
    final_acc = (clustering_accuracy(final_labeling, truth)
                 if has_truth and final_labeling.num_clusters > 0 else float("nan"))
    return TrainResult(encoder=encoder, reports=reports, instance_memory=V,
                       final_labeling=final_labeling, final_clustering_acc=final_acc)
