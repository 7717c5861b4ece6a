"""Feature memory banks: per-instance bank V and per-cluster bank M.

Both banks hold unit-norm float64 rows and update by momentum blending,

    row = momentum * row + (1 - momentum) * feature,

renormalized after the blend so rows stay on the unit sphere. A momentum of
exactly 1.0 is a bitwise no-op (the blend is skipped); momentum 0.0 equals
replacement before the renormalization. A blend that lands on the zero vector
(antipodal inputs at momentum 0.5) raises ZeroVectorError rather than guessing
a direction.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatchError, EmptyClusterError
from .numerics import l2_normalize


def _blend(row: np.ndarray, feature: np.ndarray, momentum: float) -> np.ndarray:
    if momentum == 1.0:
        return row
    return l2_normalize(momentum * row + (1.0 - momentum) * np.asarray(feature, dtype=np.float64))


def centroid(feats: np.ndarray, members: np.ndarray, fraction: float,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """Unit-norm mean of a member subset.

    fraction=1 uses all members and consumes no randomness. Otherwise a
    ceil(fraction * len)-sized subset is drawn uniformly without replacement
    (at least one member).
    """
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise EmptyClusterError("centroid of an empty cluster")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction < 1.0 and members.size > 1:
        k = int(np.ceil(fraction * members.size))
        k = max(1, min(k, members.size))
        if k < members.size:
            if rng is None:
                raise ValueError("subset centroid needs an RNG")
            members = members[rng.choice(members.size, size=k, replace=False)]
    return l2_normalize(np.mean(feats[members], axis=0))


class InstanceMemory:
    """Bank V: one row per train instance, initialized once from the encoder."""

    def __init__(self, feats: np.ndarray, momentum: float):
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2:
            raise DimMismatchError(f"instance memory expects 2-d features, got {feats.shape}")
        if not 0.0 <= momentum <= 1.0:
            raise ValueError(f"momentum must be in [0, 1], got {momentum}")
        self.feats = feats.copy()
        self.momentum = momentum

    @classmethod
    def from_encoder(cls, encoder, raws: np.ndarray, indices: np.ndarray,
                     momentum: float) -> "InstanceMemory":
        feats, _ = encoder.forward_batch(raws, indices)
        return cls(feats, momentum)

    def __len__(self) -> int:
        return self.feats.shape[0]

    def _check(self, i: int) -> None:
        if not 0 <= i < len(self):
            raise IndexError(f"instance memory index {i} out of range [0, {len(self)})")

    def update(self, i: int, feature: np.ndarray) -> None:
        """Momentum blend (the temporal-ensembling step)."""
        self._check(i)
        self.feats[i] = _blend(self.feats[i], feature, self.momentum)

    def replace(self, i: int, feature: np.ndarray) -> None:
        """Direct overwrite, used when ensembling is disabled."""
        self._check(i)
        self.feats[i] = np.asarray(feature, dtype=np.float64)

    def refresh(self, encoder, raws: np.ndarray, indices: np.ndarray,
                positions: np.ndarray) -> None:
        """Overwrite the given rows with a fresh forward pass (end-of-epoch outliers)."""
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            return
        feats, _ = encoder.forward_batch(raws[positions], np.asarray(indices)[positions])
        self.feats[positions] = feats


class ClusterMemory:
    """Bank M: one row per cluster, seeded from a random member's V row."""

    def __init__(self, feats: np.ndarray, momentum: float):
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2:
            raise DimMismatchError(f"cluster memory expects 2-d features, got {feats.shape}")
        if not 0.0 <= momentum <= 1.0:
            raise ValueError(f"momentum must be in [0, 1], got {momentum}")
        self.feats = feats.copy()
        self.momentum = momentum

    @classmethod
    def from_instances(cls, instance_memory: InstanceMemory, labeling,
                       rng: np.random.Generator, momentum: float) -> "ClusterMemory":
        rows = np.zeros((labeling.num_clusters, instance_memory.feats.shape[1]))
        for j in range(labeling.num_clusters):
            members = labeling.members(j)
            if members.size == 0:
                raise EmptyClusterError(f"cluster {j} has no members")
            pick = members[int(rng.integers(members.size))]
            rows[j] = instance_memory.feats[pick]
        return cls(rows, momentum)

    def __len__(self) -> int:
        return self.feats.shape[0]

    def update(self, j: int, feature: np.ndarray) -> None:
        if not 0 <= j < len(self):
            raise IndexError(f"cluster memory index {j} out of range [0, {len(self)})")
        self.feats[j] = _blend(self.feats[j], feature, self.momentum)
