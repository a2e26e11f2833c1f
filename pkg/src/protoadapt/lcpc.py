"""Learnable class-prototype classifier.

An ensemble of affine transform layers maps both the sample feature and the
class prototypes into a ``d_t``-dimensional space; each layer predicts a
softmax over cosine similarities and the ensemble averages those
distributions. Gradients of the self-training objective are derived by hand
and checked against central differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError, NumericalError
from .numerics import EPS, softmax


@dataclass
class TransformEnsemble:
    weight: np.ndarray  # (n_layers, d_t, d)
    bias: np.ndarray  # (n_layers, d_t)
    seed: int | None = None

    @property
    def n_layers(self) -> int:
        return self.weight.shape[0]

    @property
    def d(self) -> int:
        return self.weight.shape[2]

    @property
    def d_t(self) -> int:
        return self.weight.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def copy(self) -> "TransformEnsemble":
        return TransformEnsemble(self.weight.copy(), self.bias.copy(), self.seed)

    @classmethod
    def identity(cls, d: int) -> "TransformEnsemble":
        """Single identity layer (``d_t = d``); reduces the classifier to raw-feature prototypes."""
        return cls(np.eye(d)[None, :, :].copy(), np.zeros((1, d)))


def default_d_t(d: int) -> int:
    return max(1, d // 2)


def new_ensemble(d: int, d_t: int | None = None, n_layers: int = 5, seed: int = 0) -> TransformEnsemble:
    """Layers drawn from U[-1/sqrt(d), 1/sqrt(d)] with zero bias, one RNG substream per layer."""
    if d_t is None:
        d_t = default_d_t(d)
    if d < 1 or d_t < 1 or n_layers < 1:
        raise InvalidConfigError(f"invalid ensemble shape d={d}, d_t={d_t}, N_t={n_layers}")
    bound = 1.0 / np.sqrt(d)
    streams = np.random.SeedSequence(seed).spawn(n_layers)
    weight = np.stack([np.random.default_rng(s).uniform(-bound, bound, size=(d_t, d)) for s in streams])
    return TransformEnsemble(weight, np.zeros((n_layers, d_t)), seed)


@dataclass
class _Cache:
    x: np.ndarray
    protos: np.ndarray
    u: np.ndarray  # (L, n, d_t) revised features
    v: np.ndarray  # (L, c, d_t) revised prototypes
    nu: np.ndarray
    nv: np.ndarray
    unorm_live: np.ndarray
    vnorm_live: np.ndarray
    sim: np.ndarray  # (L, n, c)
    clipped: np.ndarray
    q: np.ndarray  # per-layer distributions (L, n, c)
    p: np.ndarray  # ensemble mean (n, c)


def _check_shapes(ens: TransformEnsemble, x: np.ndarray, protos: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != ens.d:
        raise InvalidArgumentError(f"features must have shape (n, {ens.d}), got {x.shape}")
    if protos.ndim != 2 or protos.shape[1] != ens.d or protos.shape[0] < 2:
        raise InvalidArgumentError(f"prototypes must have shape (c, {ens.d}), got {protos.shape}")


def _forward(ens: TransformEnsemble, x, protos) -> _Cache:
    x = np.asarray(x, dtype=np.float64)
    protos = np.asarray(protos, dtype=np.float64)
    _check_shapes(ens, x, protos)
    u = np.einsum("ltd,nd->lnt", ens.weight, x) + ens.bias[:, None, :]
    v = np.einsum("ltd,cd->lct", ens.weight, protos) + ens.bias[:, None, :]
    un = np.linalg.norm(u, axis=2)
    vn = np.linalg.norm(v, axis=2)
    nu, nv = np.maximum(un, EPS), np.maximum(vn, EPS)
    raw = np.einsum("lnt,lct->lnc", u, v) / (nu[:, :, None] * nv[:, None, :])
    sim = np.clip(raw, -1.0, 1.0)
    q = softmax(sim)
    return _Cache(x, protos, u, v, nu, nv, un > EPS, vn > EPS, sim, raw != sim, q, q.mean(axis=0))


def predict_batch(ens: TransformEnsemble, features, prototypes) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble distributions ``(n, c)`` and per-layer distributions ``(L, n, c)``."""
    cache = _forward(ens, np.atleast_2d(features), prototypes)
    return cache.p, cache.q


def predict(ens: TransformEnsemble, feature, prototypes) -> tuple[np.ndarray, list[np.ndarray]]:
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 1:
        raise InvalidArgumentError("predict expects a single feature vector")
    p, q = predict_batch(ens, f[None, :], prototypes)
    return p[0], [q[r, 0] for r in range(q.shape[0])]


def _backward(ens: TransformEnsemble, cache: _Cache, grad_p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_layers = ens.n_layers
    # ensemble mean, then softmax Jacobian per layer
    gq = np.broadcast_to(grad_p / n_layers, cache.q.shape)
    gs = cache.q * (gq - (gq * cache.q).sum(axis=2, keepdims=True))
    gs = np.where(cache.clipped, 0.0, gs)

    denom = cache.nu[:, :, None] * cache.nv[:, None, :]
    a = gs / denom
    gs_s = gs * cache.sim
    gu = np.einsum("lnc,lct->lnt", a, cache.v)
    gu -= (gs_s.sum(axis=2) * cache.unorm_live / cache.nu**2)[:, :, None] * cache.u
    gv = np.einsum("lnc,lnt->lct", a, cache.u)
    gv -= (gs_s.sum(axis=1) * cache.vnorm_live / cache.nv**2)[:, :, None] * cache.v

    gw = np.einsum("lnt,nd->ltd", gu, cache.x) + np.einsum("lct,cd->ltd", gv, cache.protos)
    gb = gu.sum(axis=1) + gv.sum(axis=1)
    return gw, gb


def confident_mask(base_logits, conf: float) -> np.ndarray:
    """Samples whose base softmax peak exceeds ``conf``."""
    return softmax(np.atleast_2d(base_logits)).max(axis=1) > conf


def lcpc_loss(base_logits, preds, conf: float) -> tuple[float, int]:
    """Mean soft-target CE over confident samples; ``(0.0, 0)`` when none pass."""
    lg = np.atleast_2d(np.asarray(base_logits, dtype=np.float64))
    p = np.atleast_2d(np.asarray(preds, dtype=np.float64))
    if lg.shape != p.shape:
        raise InvalidArgumentError(f"logits {lg.shape} and predictions {p.shape} differ")
    mask = confident_mask(lg, conf)
    count = int(mask.sum())
    if count == 0:
        return 0.0, 0
    ce = -(softmax(lg[mask]) * np.log(np.maximum(p[mask], EPS))).sum(axis=1)
    return float(ce.mean()), count


@dataclass
class NeighborBatch:
    """Neighbour features for a batch plus, per sample, row indices into them."""

    features: np.ndarray  # (m, d)
    index: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def empty(cls, n: int, d: int) -> "NeighborBatch":
        return cls(np.empty((0, d)), [np.empty(0, dtype=np.int64) for _ in range(n)])


@dataclass
class LossResult:
    total: float
    lcpc: float
    nfc: float
    n_confident: int
    grad_weight: np.ndarray
    grad_bias: np.ndarray
    preds: np.ndarray
    neighbor_preds: np.ndarray


def loss_and_gradients(
    ens: TransformEnsemble,
    features,
    prototypes,
    base_logits,
    neighbors: NeighborBatch | None,
    conf: float,
    alpha: float,
    through_neighbors: bool = False,
) -> LossResult:
    """Total objective ``L_lcpc + alpha * L_nfc`` and its gradient w.r.t. every layer.

    ``L_nfc`` sums the neighbour cross-entropies per sample and averages over
    the batch. Neighbour predictions are detached unless ``through_neighbors``.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    lg = np.atleast_2d(np.asarray(base_logits, dtype=np.float64))
    n = x.shape[0]
    if lg.shape[0] != n:
        raise InvalidArgumentError("features and base logits differ in batch size")
    if neighbors is None:
        neighbors = NeighborBatch.empty(n, x.shape[1])
    if len(neighbors.index) != n:
        raise InvalidArgumentError("neighbour index must have one entry per sample")
    m = neighbors.features.shape[0]

    cache = _forward(ens, np.vstack([x, neighbors.features]) if m else x, prototypes)
    p, pn = cache.p[:n], cache.p[n:]
    if lg.shape[1] != p.shape[1]:
        raise InvalidArgumentError("base logits and prototypes disagree on class count")
    logp = np.log(np.maximum(p, EPS))
    live = p > EPS
    grad_p = np.zeros_like(cache.p)

    mask = confident_mask(lg, conf)
    n_conf = int(mask.sum())
    lcpc = 0.0
    if n_conf:
        t = softmax(lg[mask])
        lcpc = float(-(t * logp[mask]).sum(axis=1).mean())
        grad_p[:n][mask] -= np.where(live[mask], t / np.maximum(p[mask], EPS), 0.0) / n_conf

    nfc = 0.0
    if alpha != 0.0 and m:
        target_sum = np.zeros_like(p)
        for i, rows in enumerate(neighbors.index):
            if rows.size:
                target_sum[i] = pn[rows].sum(axis=0)
        nfc = float(-(target_sum * logp).sum() / n)
        grad_p[:n] -= alpha / n * np.where(live, target_sum / np.maximum(p, EPS), 0.0)
        if through_neighbors:
            for i, rows in enumerate(neighbors.index):
                np.add.at(grad_p[n:], rows, -alpha / n * logp[i])

    total = lcpc + alpha * nfc
    gw, gb = _backward(ens, cache, grad_p)
    if not (np.isfinite(total) and np.isfinite(gw).all() and np.isfinite(gb).all()):
        raise NumericalError(
            f"non-finite loss or gradient (total={total}, lcpc={lcpc}, nfc={nfc}, confident={n_conf})"
        )
    return LossResult(total, lcpc, nfc, n_conf, gw, gb, p, pn)
