"""Camera-aware distances for clustering.

Cross-camera style gaps inflate same-camera similarities relative to
cross-camera ones. The camera offset matrix estimates that bias as the mean
pairwise similarity per camera pair (self-pairs excluded); subtracting it,
scaled by ``cam_weight``, from the similarity matrix yields an adjusted
similarity S. Two ways to turn S into a distance:

  direct            dist = 1 - S
  softmax_relative  per row, p' = exp(S - rowmax) over off-diagonal entries
                    (softmax followed by row-max rescaling; denominators
                    cancel), then dist = 1 - (p'[u][v] + p'[v][u]) / 2

The softmax form expresses each entry relative to its row's strongest
neighbor, which keeps a single eps meaningful as absolute similarity scales
drift during training. Diagonals are forced to zero in both modes. Direct-mode
entries may go slightly negative when offsets are negative; they are not
clamped, so threshold shifts commute exactly with offset subtraction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatchError, InvalidConfigError

DIRECT = "direct"
SOFTMAX_RELATIVE = "softmax_relative"
MODES = (DIRECT, SOFTMAX_RELATIVE)


@dataclass
class CameraOffsets:
    values: np.ndarray  # (n_cam, n_cam), symmetric
    missing_pairs: list[tuple[int, int]] = field(default_factory=list)  # fell back to 0.0


def camera_offsets(sim: np.ndarray, cameras: np.ndarray, n_cam: int) -> CameraOffsets:
    """Mean similarity per (camera, camera) pair, self-pairs excluded.

    Pairs with no qualifying instances (e.g. a camera with a single instance
    on the diagonal) fall back to 0.0 and are recorded with a warning.
    """
    sim = np.asarray(sim, dtype=np.float64)
    cameras = np.asarray(cameras, dtype=np.int64)
    if sim.shape[0] != sim.shape[1] or sim.shape[0] != cameras.shape[0]:
        raise DimMismatchError(
            f"camera_offsets: similarity {sim.shape} vs cameras {cameras.shape}")
    if cameras.size and (cameras.min() < 0 or cameras.max() >= n_cam):
        raise IndexError(f"camera id out of range [0, {n_cam})")

    values = np.zeros((n_cam, n_cam))
    missing: list[tuple[int, int]] = []
    idx = [np.flatnonzero(cameras == c) for c in range(n_cam)]
    for a in range(n_cam):
        for b in range(a, n_cam):
            block = sim[np.ix_(idx[a], idx[b])]
            if a == b:
                total = block.sum() - np.trace(block)
                count = idx[a].size * (idx[a].size - 1)
            else:
                total = block.sum()
                count = idx[a].size * idx[b].size
            if count == 0:
                missing.append((a, b))
                mean = 0.0
            else:
                mean = total / count
            values[a, b] = mean
            values[b, a] = mean
    if missing:
        warnings.warn(f"camera pairs with no instance pairs, offset set to 0: {missing}",
                      stacklevel=2)
    return CameraOffsets(values=values, missing_pairs=missing)


def unified_distance(sim: np.ndarray, offsets: CameraOffsets, cameras: np.ndarray,
                     cam_weight: float, mode: str = SOFTMAX_RELATIVE) -> np.ndarray:
    """Distance matrix from similarities with the camera offset subtracted."""
    if mode not in MODES:
        raise InvalidConfigError(f"distance mode must be one of {MODES}, got {mode!r}")
    sim = np.asarray(sim, dtype=np.float64)
    cameras = np.asarray(cameras, dtype=np.int64)
    n = sim.shape[0]
    if sim.shape != (n, n) or cameras.shape != (n,):
        raise DimMismatchError(
            f"unified_distance: similarity {sim.shape} vs cameras {cameras.shape}")

    adjusted = sim - cam_weight * offsets.values[np.ix_(cameras, cameras)]

    if mode == DIRECT:
        dist = 1.0 - adjusted
        np.fill_diagonal(dist, 0.0)
        return dist

    if n == 1:
        return np.zeros((1, 1))
    work = adjusted.copy()
    np.fill_diagonal(work, -np.inf)  # row max over off-diagonal entries only
    rowmax = work.max(axis=1)
    rescaled = np.exp(work - rowmax[:, None])  # == softmax(row) / max(softmax(row))
    dist = 1.0 - (rescaled + rescaled.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return dist


def plain_distance(sim: np.ndarray) -> np.ndarray:
    """1 - similarity with zero diagonal (the camera-agnostic path)."""
    dist = 1.0 - np.asarray(sim, dtype=np.float64)
    np.fill_diagonal(dist, 0.0)
    return dist
