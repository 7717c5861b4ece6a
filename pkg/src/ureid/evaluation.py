"""Retrieval metrics: mean average precision and CMC over a query/gallery split.

Protocol: rank gallery by descending cosine similarity (ties broken by
ascending gallery index), drop gallery entries sharing both identity and
camera with the query, then score. AP is the mean over relevant ranks k of
(relevant in top k) / k; CMC[r] is the fraction of queries whose first correct
match appears within rank r. Queries with no valid cross-camera match are
skipped with a warning and excluded from both averages.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GALLERY, QUERY
from .errors import DimMismatchError, EmptyGalleryError


@dataclass
class RetrievalResult:
    mean_ap: float
    cmc: np.ndarray  # cmc[r-1] = fraction with a match in top r, full gallery depth
    num_queries: int
    skipped: int

    def cmc_at(self, rank: int) -> float:
        rank = min(rank, self.cmc.shape[0])
        return float(self.cmc[rank - 1])

    def to_dict(self) -> dict:
        return {
            "mAP": self.mean_ap,
            "cmc": [self.cmc_at(r) for r in (1, 5, 10, 20)],
            "num_queries": self.num_queries,
            "skipped": self.skipped,
        }


def evaluate_features(query_feats: np.ndarray, query_ids: np.ndarray, query_cams: np.ndarray,
                      gallery_feats: np.ndarray, gallery_ids: np.ndarray,
                      gallery_cams: np.ndarray) -> RetrievalResult:
    query_feats = np.asarray(query_feats, dtype=np.float64)
    gallery_feats = np.asarray(gallery_feats, dtype=np.float64)
    if gallery_feats.shape[0] == 0:
        raise EmptyGalleryError("gallery is empty")
    if query_feats.shape[1] != gallery_feats.shape[1]:
        raise DimMismatchError(
            f"query dim {query_feats.shape[1]} != gallery dim {gallery_feats.shape[1]}")
    query_ids = np.asarray(query_ids, dtype=np.int64)
    query_cams = np.asarray(query_cams, dtype=np.int64)
    gallery_ids = np.asarray(gallery_ids, dtype=np.int64)
    gallery_cams = np.asarray(gallery_cams, dtype=np.int64)

    sims = query_feats @ gallery_feats.T
    depth = gallery_feats.shape[0]
    aps: list[float] = []
    first_match_ranks: list[int] = []
    skipped = 0

    for q in range(query_feats.shape[0]):
        order = np.argsort(-sims[q], kind="stable")  # ties -> ascending gallery index
        keep = ~((gallery_ids[order] == query_ids[q]) & (gallery_cams[order] == query_cams[q]))
        ranked = order[keep]
        relevant = gallery_ids[ranked] == query_ids[q]
        n_rel = int(relevant.sum())
        if n_rel == 0:
            skipped += 1
            continue
        hits = np.flatnonzero(relevant)
        precisions = np.arange(1, n_rel + 1) / (hits + 1.0)
        aps.append(float(precisions.mean()))
        first_match_ranks.append(int(hits[0]) + 1)

    if skipped:
        warnings.warn(f"{skipped} queries had no valid cross-camera match and were skipped",
                      stacklevel=2)

    num_queries = len(aps)
    if num_queries == 0:
        return RetrievalResult(float("nan"), np.zeros(depth), 0, skipped)

    ranks = np.bincount(np.array(first_match_ranks), minlength=depth + 1)[1:depth + 1]
    cmc = np.cumsum(ranks) / num_queries
    return RetrievalResult(float(np.mean(aps)), cmc, num_queries, skipped)


def evaluate(encoder, ds: Dataset) -> RetrievalResult:
    """Embed the query/gallery splits with the encoder and score retrieval."""
    queries = ds.subset(QUERY)
    gallery = ds.subset(GALLERY)
    if not gallery:
        raise EmptyGalleryError("dataset has no gallery split")
    if not queries:
        raise EmptyGalleryError("dataset has no query split")

    def embed(instances):
        raws = np.stack([inst.raw for inst in instances])
        indices = np.array([inst.index for inst in instances])
        feats, _ = encoder.forward_batch(raws, indices)
        return feats

    return evaluate_features(
        embed(queries),
        ds.identities(queries),
        np.array([inst.camera for inst in queries]),
        embed(gallery),
        ds.identities(gallery),
        np.array([inst.camera for inst in gallery]),
    )
