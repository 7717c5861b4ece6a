"""Temperature-scaled contrastive loss against a fixed classifier bank.

loss(f, y) = -log softmax_y(<f, m_j> / temperature) over all classifier rows
m_j. Logits are max-subtracted before exponentiation. Gradients flow into the
query embedding only; the classifier rows are treated as constants:

    d loss / d f = sum_j (p_j - [j == y]) * m_j / temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, InvalidConfigError


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.04

    def validate(self) -> None:
        if self.temperature <= 0:
            raise InvalidConfigError(f"temperature must be > 0, got {self.temperature}")


def contrastive_loss(f: np.ndarray, classifiers: np.ndarray, target: int,
                     cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Single-sample loss and gradient w.r.t. the embedding."""
    cfg.validate()
    f = np.asarray(f, dtype=np.float64)
    classifiers = np.asarray(classifiers, dtype=np.float64)
    if classifiers.ndim != 2 or classifiers.shape[1] != f.shape[0]:
        raise DimMismatchError(
            f"classifiers {classifiers.shape} incompatible with embedding {f.shape}")
    if not 0 <= target < classifiers.shape[0]:
        raise IndexError(f"target {target} out of range [0, {classifiers.shape[0]})")

    logits = classifiers @ f / cfg.temperature
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    total = exp.sum()
    loss = float(np.log(total) - shifted[target])
    probs = exp / total
    probs[target] -= 1.0
    grad = probs @ classifiers / cfg.temperature
    return loss, grad


def batch_loss(embeddings: np.ndarray, targets: np.ndarray, classifiers: np.ndarray,
               cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-sample losses and embedding gradients for a batch.

    Returns (losses (B,), grads (B, d)). The mean over losses is the batch
    objective; the trainer divides the accumulated parameter gradient by B.
    """
    cfg.validate()
    embeddings = np.asarray(embeddings, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    classifiers = np.asarray(classifiers, dtype=np.float64)
    if embeddings.ndim != 2 or classifiers.ndim != 2 \
            or embeddings.shape[1] != classifiers.shape[1]:
        raise DimMismatchError(
            f"embeddings {embeddings.shape} incompatible with classifiers {classifiers.shape}")
    if targets.shape != (embeddings.shape[0],):
        raise DimMismatchError(f"targets shape {targets.shape} != ({embeddings.shape[0]},)")
    if targets.size and (targets.min() < 0 or targets.max() >= classifiers.shape[0]):
        raise IndexError("target out of range of classifier bank")

    logits = embeddings @ classifiers.T / cfg.temperature
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1)
    rows = np.arange(targets.size)
    losses = np.log(total) - shifted[rows, targets]
    probs = exp / total[:, None]
    probs[rows, targets] -= 1.0
    grads = probs @ classifiers / cfg.temperature
    return losses, grads
