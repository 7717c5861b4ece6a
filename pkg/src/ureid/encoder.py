"""Trainable encoders mapping raw features to unit-norm embeddings.

Two kinds:
  linear          theta is (embedding_dim, input_dim); forward = normalize(theta @ raw)
  free_embedding  theta is (num_instances, embedding_dim); forward = normalize(theta[index])

The free kind gives every instance its own unconstrained embedding row, which
isolates the training dynamics from representation capacity.

Gradients flow through the normalization: for f = z/||z||,
d loss/d z = (g - f (f.g)) / ||z||. Parameter updates use hand-rolled Adam with
bias correction; gradients are accumulated over a batch first, then one step is
taken, so the update depends only on the accumulated gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimMismatchError, InvalidConfigError, ZeroVectorError
from .numerics import ZERO_NORM_TOL

LINEAR = "linear"
FREE = "free_embedding"
KINDS = (LINEAR, FREE)

INIT_UNIFORM = "uniform"
INIT_PCA = "pca"


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 0.00035
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Encoder:
    def __init__(self, kind: str, theta: np.ndarray, input_dim: int, embedding_dim: int):
        if kind not in KINDS:
            raise InvalidConfigError(f"encoder kind must be one of {KINDS}, got {kind!r}")
        self.kind = kind
        self.theta = np.asarray(theta, dtype=np.float64)
        self.input_dim = input_dim
        self.embedding_dim = embedding_dim
        self.adam_m = np.zeros_like(self.theta)
        self.adam_v = np.zeros_like(self.theta)
        self.step_count = 0

    # ---- constructors -------------------------------------------------

    @classmethod
    def linear(cls, input_dim: int, embedding_dim: int, rng: np.random.Generator) -> "Encoder":
        """Scaled-uniform init: entries ~ U(-1/sqrt(input_dim), 1/sqrt(input_dim))."""
        scale = 1.0 / np.sqrt(input_dim)
        theta = rng.uniform(-scale, scale, size=(embedding_dim, input_dim))
        return cls(LINEAR, theta, input_dim, embedding_dim)

    @classmethod
    def linear_pca(cls, raws: np.ndarray, embedding_dim: int) -> "Encoder":
        """Rows = top right-singular directions of the (uncentered) data matrix.

        A variance-preserving start: pairwise geometry of the inputs survives
        the projection far better than under a random matrix, which is what a
        pre-trained backbone would provide at full scale. Deterministic: the
        sign of each direction is fixed so its largest-magnitude entry is
        positive.
        """
        raws = np.asarray(raws, dtype=np.float64)
        if raws.ndim != 2:
            raise DimMismatchError(f"linear_pca: expected 2-d data, got shape {raws.shape}")
        n, d = raws.shape
        if embedding_dim > d:
            raise InvalidConfigError(
                f"embedding_dim {embedding_dim} exceeds input_dim {d} for pca init")
        _, _, vt = np.linalg.svd(raws, full_matrices=False)
        theta = vt[:embedding_dim].copy()
        for row in theta:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        return cls(LINEAR, theta, d, embedding_dim)

    @classmethod
    def free_embedding(cls, num_instances: int, embedding_dim: int,
                       rng: np.random.Generator) -> "Encoder":
        """One random unit row per instance."""
        theta = rng.standard_normal((num_instances, embedding_dim))
        theta /= np.linalg.norm(theta, axis=1, keepdims=True)
        return cls(FREE, theta, embedding_dim, embedding_dim)

    # ---- forward / backward -------------------------------------------

    def _pre_norm(self, raw: np.ndarray | None, index: int | None) -> np.ndarray:
        if self.kind == LINEAR:
            raw = np.asarray(raw, dtype=np.float64)
            if raw.shape != (self.input_dim,):
                raise DimMismatchError(
                    f"forward: expected raw shape ({self.input_dim},), got {raw.shape}")
            return self.theta @ raw
        if index is None:
            raise IndexError("free_embedding forward needs an instance index")
        if not 0 <= index < self.theta.shape[0]:
            raise IndexError(f"instance index {index} out of range [0, {self.theta.shape[0]})")
        return self.theta[index].copy()

    def forward(self, raw: np.ndarray | None = None, index: int | None = None) -> np.ndarray:
        z = self._pre_norm(raw, index)
        norm = float(np.linalg.norm(z))
        if norm <= ZERO_NORM_TOL:
            raise ZeroVectorError("encoder produced a zero vector before normalization")
        return z / norm

    def forward_batch(self, raws: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized forward. Returns (embeddings, pre-normalization norms)."""
        if self.kind == LINEAR:
            z = np.asarray(raws, dtype=np.float64) @ self.theta.T
        else:
            z = self.theta[np.asarray(indices, dtype=np.int64)]
        norms = np.linalg.norm(z, axis=1)
        if np.any(norms <= ZERO_NORM_TOL):
            raise ZeroVectorError("encoder produced a zero vector before normalization")
        return z / norms[:, None], norms

    def backward(self, raw: np.ndarray | None, index: int | None,
                 grad_embedding: np.ndarray) -> np.ndarray:
        """Dense d loss/d theta for one sample (reference path; tests and checks)."""
        z = self._pre_norm(raw, index)
        norm = float(np.linalg.norm(z))
        if norm <= ZERO_NORM_TOL:
            raise ZeroVectorError("backward through a zero vector")
        f = z / norm
        grad_z = (np.asarray(grad_embedding, dtype=np.float64) - f * float(f @ grad_embedding)) / norm
        grad = np.zeros_like(self.theta)
        if self.kind == LINEAR:
            grad += np.outer(grad_z, raw)
        else:
            grad[index] = grad_z
        return grad

    def batch_grad(self, raws: np.ndarray, indices: np.ndarray, embeddings: np.ndarray,
                   norms: np.ndarray, grad_embeddings: np.ndarray) -> np.ndarray:
        """Sum of per-sample parameter gradients, vectorized.

        ``embeddings``/``norms`` must come from forward_batch on the same
        samples. Duplicate indices accumulate (unbuffered add).
        """
        grad_embeddings = np.asarray(grad_embeddings, dtype=np.float64)
        radial = np.sum(embeddings * grad_embeddings, axis=1, keepdims=True)
        grad_z = (grad_embeddings - embeddings * radial) / norms[:, None]
        grad = np.zeros_like(self.theta)
        if self.kind == LINEAR:
            grad += grad_z.T @ np.asarray(raws, dtype=np.float64)
        else:
            np.add.at(grad, np.asarray(indices, dtype=np.int64), grad_z)
        return grad

    # ---- optimizer ------------------------------------------------------

    def adam_step(self, grad: np.ndarray, cfg: OptimConfig) -> None:
        if grad.shape != self.theta.shape:
            raise DimMismatchError(
                f"adam_step: grad shape {grad.shape} != theta shape {self.theta.shape}")
        self.step_count += 1
        t = self.step_count
        self.adam_m = cfg.beta1 * self.adam_m + (1.0 - cfg.beta1) * grad
        self.adam_v = cfg.beta2 * self.adam_v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.adam_m / (1.0 - cfg.beta1 ** t)
        v_hat = self.adam_v / (1.0 - cfg.beta2 ** t)
        self.theta -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)

    # ---- checkpoint IO --------------------------------------------------

    def save(self, path_prefix: str | Path) -> dict[str, Path]:
        """Write <prefix>.json (manifest) and <prefix>.bin (little-endian float64 theta)."""
        prefix = Path(path_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        manifest_path = prefix.with_suffix(".json")
        blob_path = prefix.with_suffix(".bin")
        blob_path.write_bytes(self.theta.astype("<f8").tobytes())
        manifest = {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "embedding_dim": self.embedding_dim,
            "shape": list(self.theta.shape),
            "dtype": "<f8",
            "step_count": self.step_count,
            "data_file": blob_path.name,
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return {"manifest": manifest_path, "blob": blob_path}

    @classmethod
    def load(cls, path_prefix: str | Path) -> "Encoder":
        prefix = Path(path_prefix)
        manifest_path = prefix.with_suffix(".json")
        manifest = json.loads(manifest_path.read_text())
        blob_path = manifest_path.parent / manifest["data_file"]
        shape = tuple(manifest["shape"])
        theta = np.frombuffer(blob_path.read_bytes(), dtype="<f8").reshape(shape).copy()
        enc = cls(manifest["kind"], theta, manifest["input_dim"], manifest["embedding_dim"])
        enc.step_count = manifest.get("step_count", 0)
        return enc
