"""Dense float64 helpers: softmax, entropy, cosine similarity, soft cross-entropy.

Vectors are plain 1-D ``numpy.float64`` arrays; batched variants operate on
the last axis.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NumericalError

EPS = 1e-12


def as_vec(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    return v


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise InvalidArgumentError("softmax of an empty vector")
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def entropy(logits) -> float | np.ndarray:
    """Shannon entropy (nats) of ``softmax(logits)``; batched over leading axes."""
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise InvalidArgumentError("entropy of an empty vector")
    p = softmax(x)
    # log-softmax avoids log(0) and gives 0*log0 = 0 through p = 0
    h = -(p * log_softmax(x)).sum(axis=-1)
    h = np.maximum(h, 0.0)
    return float(h) if h.ndim == 0 else h


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError(f"cosine_sim needs equal-length vectors, got {a.shape} and {b.shape}")
    na = max(float(np.linalg.norm(a)), EPS)
    nb = max(float(np.linalg.norm(b)), EPS)
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between rows of ``x`` (n, m) and ``y`` (k, m)."""
    nx = np.maximum(np.linalg.norm(x, axis=1), EPS)
    ny = np.maximum(np.linalg.norm(y, axis=1), EPS)
    return np.clip((x @ y.T) / np.outer(nx, ny), -1.0, 1.0)


def soft_cross_entropy(target, pred) -> float:
    """``-sum_k target_k * log(pred_k)`` with ``pred`` clamped below at 1e-12."""
    t = np.asarray(target, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.shape != p.shape:
        raise InvalidArgumentError(f"class-count mismatch: {t.shape} vs {p.shape}")
    return float(-(t * np.log(np.maximum(p, EPS))).sum())


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    if h <= 0:
        raise InvalidArgumentError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite function value at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(x.shape)
