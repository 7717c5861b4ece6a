"""DBSCAN on a precomputed distance matrix, with deterministic tie-breaking.

Rules fixed by contract:
  * neighborhoods are strict (< eps) and include the point itself;
  * a point is core iff its neighborhood size >= min_samples;
  * clusters are connected components of core points; border (non-core)
    points join the first core cluster that reaches them when seeds are
    visited in ascending index order;
  * final labels are renumbered by each cluster's smallest member index;
  * points reachable from no core get OUTLIER (-1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, InvalidConfigError, NoClustersError

OUTLIER = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.5
    min_samples: int = 4

    def validate(self) -> None:
        if self.eps <= 0:
            raise InvalidConfigError(f"eps must be > 0, got {self.eps}")
        if self.min_samples < 1:
            raise InvalidConfigError(f"min_samples must be >= 1, got {self.min_samples}")


@dataclass
class PseudoLabeling:
    labels: np.ndarray  # (n,), values in {-1} | [0, num_clusters)
    num_clusters: int

    def members(self, j: int) -> np.ndarray:
        if not 0 <= j < self.num_clusters:
            raise IndexError(f"cluster id {j} out of range [0, {self.num_clusters})")
        return np.flatnonzero(self.labels == j)

    def outliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OUTLIER)

    @property
    def num_clustered(self) -> int:
        return int(np.count_nonzero(self.labels != OUTLIER))


def dbscan(dist: np.ndarray, params: DbscanParams) -> PseudoLabeling:
    params.validate()
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise DimMismatchError(f"dbscan expects a square matrix, got {dist.shape}")

    adj = dist < params.eps  # diagonal is 0 < eps, so self-inclusive by construction
    core = adj.sum(axis=1) >= params.min_samples

    labels = np.full(n, OUTLIER, dtype=np.int64)
    next_label = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != OUTLIER:
            continue
        labels[seed] = next_label
        queue = deque([seed])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if labels[v] == OUTLIER:
                    labels[v] = next_label
                    if core[v]:
                        queue.append(v)
        next_label += 1

    if next_label > 1:
        # renumber by ascending smallest member index
        first_member = np.full(next_label, n, dtype=np.int64)
        for i in range(n - 1, -1, -1):
            if labels[i] != OUTLIER:
                first_member[labels[i]] = i
        order = np.argsort(first_member, kind="stable")
        remap = np.empty(next_label, dtype=np.int64)
        remap[order] = np.arange(next_label)
        mask = labels != OUTLIER
        labels[mask] = remap[labels[mask]]

    return PseudoLabeling(labels=labels, num_clusters=next_label)


def clustering_accuracy(labeling: PseudoLabeling, identities: np.ndarray) -> float:
    """Unweighted mean over clusters of the majority-identity fraction.

    Outliers are excluded. Raises NoClustersError when the labeling is empty.
    """
    if labeling.num_clusters == 0:
        raise NoClustersError("clustering accuracy needs at least one cluster")
    identities = np.asarray(identities, dtype=np.int64)
    if identities.shape[0] != labeling.labels.shape[0]:
        raise DimMismatchError(
            f"identities {identities.shape} vs labels {labeling.labels.shape}")
    fractions = []
    for j in range(labeling.num_clusters):
        ids = identities[labeling.members(j)]
        counts = np.bincount(ids - ids.min()) if ids.size else np.array([0])
        fractions.append(counts.max() / ids.size)
    return float(np.mean(fractions))
