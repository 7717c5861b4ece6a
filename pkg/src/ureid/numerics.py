"""Small numeric helpers: normalization, cosine similarity, seeded RNG streams.

All randomness in the package flows through ``spawn_rng``: one top-level seed
plus a purpose tag yields an independent, reproducible ``numpy.random.Generator``.
No function here touches global RNG state.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DimMismatchError, ZeroVectorError

# Norms at or below this are treated as zero (no recoverable direction).
ZERO_NORM_TOL = 1e-12

# Unit-norm bookkeeping tolerance used by the memory banks.
UNIT_NORM_ATOL = 1e-9


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Return v / ||v||_2 as float64. Raises ZeroVectorError on a zero vector."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_NORM_TOL:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:.3e}")
    return v / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors, clipped into [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatchError(f"cosine: shapes {u.shape} and {v.shape} differ")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu <= ZERO_NORM_TOL or nv <= ZERO_NORM_TOL:
        raise ZeroVectorError("cosine: zero-norm operand")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def pairwise_similarity(feats: np.ndarray) -> np.ndarray:
    """N x N cosine-similarity matrix for unit-normalized rows.

    The result is exactly symmetric, has unit diagonal, and is clipped
    into [-1, 1]. Rows are assumed unit norm (the memory banks maintain
    that invariant); no renormalization happens here.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise DimMismatchError(f"pairwise_similarity: expected 2-d array, got shape {feats.shape}")
    sim = feats @ feats.T
    sim = (sim + sim.T) / 2.0  # force exact symmetry regardless of BLAS path
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    return sim


def _tag_to_u64(tag: str) -> int:
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def spawn_rng(seed: int, tag: str) -> np.random.Generator:
    """Derive a named RNG stream from a top-level seed.

    Streams for distinct tags are independent; the same (seed, tag) pair
    always reproduces the same draw sequence.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng((int(seed) ^ _tag_to_u64(tag)) & 0xFFFFFFFFFFFFFFFF)
