"""Unsupervised re-identification embeddings at desk scale.

Feature vectors in, unit-norm embeddings out: the pipeline alternates
camera-aware density clustering over a feature memory with contrastive
training against per-cluster classifiers, entirely without identity labels.
"""

__version__ = "0.1.0"

from .clustering import DbscanParams, OUTLIER, PseudoLabeling, clustering_accuracy, dbscan
from .dataset import Dataset, GenConfig, Instance, TrainView, export, generate, ingest
from .distance import CameraOffsets, camera_offsets, plain_distance, unified_distance
from .encoder import Encoder, OptimConfig
from .errors import (DimMismatchError, EmptyClusterError, EmptyGalleryError,
                     InvalidConfigError, NoClustersError, ParseError, UreidError,
                     ZeroVectorError)
from .estimator import ClusterContrastEmbedding
from .evaluation import RetrievalResult, evaluate, evaluate_features
from .loss import LossConfig, batch_loss, contrastive_loss
from .memory import ClusterMemory, InstanceMemory, centroid
from .numerics import cosine, l2_normalize, pairwise_similarity, spawn_rng
from .sampler import SamplerConfig, epoch_batches
from .trainer import EpochReport, TrainConfig, TrainResult, train

__all__ = [
    "ClusterContrastEmbedding",
    "CameraOffsets", "ClusterMemory", "Dataset", "DbscanParams", "Encoder",
    "EpochReport", "GenConfig", "Instance", "InstanceMemory", "LossConfig",
    "OptimConfig", "OUTLIER", "PseudoLabeling", "RetrievalResult", "SamplerConfig",
    "TrainConfig", "TrainResult", "TrainView",
    "batch_loss", "camera_offsets", "centroid", "clustering_accuracy",
    "contrastive_loss", "cosine", "dbscan", "epoch_batches", "evaluate",
    "evaluate_features", "export", "generate", "ingest", "l2_normalize",
    "pairwise_similarity", "plain_distance", "spawn_rng", "train",
    "unified_distance",
    "DimMismatchError", "EmptyClusterError", "EmptyGalleryError",
    "InvalidConfigError", "NoClustersError", "ParseError", "UreidError",
    "ZeroVectorError",
]
