"""P-K batch construction over pseudo-labeled clusters.

Each epoch shuffles the cluster ids and consumes them without replacement
into ceil(Y / P) groups; every cluster in a group contributes K instance
draws, so a full batch holds P * K indices (the last group may hold fewer
clusters). Outliers are never sampled.

Camera coverage rule: a cluster spanning more than one camera first draws one
member from each of two distinct cameras, then fills the remaining K - 2
slots (without replacement when the cluster has at least K members, with
replacement from the full member list otherwise). Clusters smaller than K
repeat members as needed; a single-member cluster contributes that member K
times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import PseudoLabeling
from .errors import InvalidConfigError


@dataclass(frozen=True)
class SamplerConfig:
    P: int = 16  # clusters per batch
    K: int = 4   # instances per cluster

    def validate(self) -> None:
        if self.P < 1:
            raise InvalidConfigError(f"P must be >= 1, got {self.P}")
        if self.K < 1:
            raise InvalidConfigError(f"K must be >= 1, got {self.K}")


def _draw_cluster(members: np.ndarray, cameras: np.ndarray, k: int,
                  rng: np.random.Generator) -> list[int]:
    cams_present = np.unique(cameras[members])
    chosen: list[int] = []
    if cams_present.size >= 2 and k >= 2:
        pair = rng.permutation(cams_present.size)[:2]
        for cam in cams_present[pair]:
            pool = members[cameras[members] == cam]
            chosen.append(int(pool[rng.integers(pool.size)]))
        remaining = k - 2
    else:
        remaining = k
    if remaining > 0:
        if members.size >= k:
            pool = np.setdiff1d(members, np.array(chosen, dtype=np.int64))
            extra = pool[rng.choice(pool.size, size=remaining, replace=False)]
        else:
            extra = members[rng.integers(members.size, size=remaining)]
        chosen.extend(int(x) for x in extra)
    return chosen


def epoch_batches(labeling: PseudoLabeling, cameras: np.ndarray, cfg: SamplerConfig,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """One epoch's batches as arrays of instance positions."""
    cfg.validate()
    cameras = np.asarray(cameras, dtype=np.int64)
    if cameras.shape != labeling.labels.shape:
        raise InvalidConfigError(
            f"cameras shape {cameras.shape} != labels shape {labeling.labels.shape}")
    if labeling.num_clusters == 0:
        return []

    order = rng.permutation(labeling.num_clusters)
    batches: list[np.ndarray] = []
    for start in range(0, order.size, cfg.P):
        group = order[start:start + cfg.P]
        batch: list[int] = []
        for j in group:
            batch.extend(_draw_cluster(labeling.members(int(j)), cameras, cfg.K, rng))
        batches.append(np.array(batch, dtype=np.int64))
    return batches
