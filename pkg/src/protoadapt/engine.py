"""Online adaptation loop and the baseline strategies it is compared against.

Every strategy consumes batches of ``(features, logits)`` only; ground-truth
labels never reach this module except through :func:`run_stream`, which
hands them straight to the metrics after all batches are processed.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

import numpy as np

from . import lcpc, metrics
from .errors import InvalidArgumentError, InvalidConfigError, NumericalError, UndefinedMetricError
from .memory_bank import MemoryBank
from .nfc import CalibratedPrediction
from .numerics import cosine_matrix, softmax
from .optimizer import AdamState, adam_step

STRATEGIES = ("no_adapt", "pseudo_label", "prototype_only", "ours")


@dataclass
class StrategyConfig:
    strategy: str = "ours"
    n_m: int = 1000
    n_t: int = 5
    d_t: int | None = None
    n_f: int = 16
    conf: float = 0.7
    alpha: float = 0.1
    lr: float = 1e-5
    k_s: int = 1
    batch_size: int = 32
    seed: int = 0
    enable_lcpc_training: bool = True
    enable_nfc: bool = True
    identity_transform: bool = False
    predict_after_update: bool = False
    nfc_grad_through_neighbors: bool = False
    reset_optimizer_per_batch: bool = False
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> "StrategyConfig":
        if self.strategy not in STRATEGIES:
            raise InvalidConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.n_m < 1 or self.n_t < 1 or self.n_f < 0 or self.k_s < 1 or self.batch_size < 1:
            raise InvalidConfigError("N_m, N_t, K_s and batch size must be positive; N_f non-negative")
        if self.d_t is not None and self.d_t < 1:
            raise InvalidConfigError("d_t must be positive")
        if self.lr <= 0 or self.alpha < 0:
            raise InvalidConfigError("lr must be positive and alpha non-negative")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _check_batch(features, logits, d: int, c: int) -> tuple[np.ndarray, np.ndarray]:
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    lg = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if f.shape[0] == 0:
        raise InvalidArgumentError("empty batch")
    if f.shape[1] != d or lg.shape != (f.shape[0], c):
        raise InvalidArgumentError(f"batch shapes {f.shape}/{lg.shape} do not match d={d}, c={c}")
    return f, lg


def _predictions(raw: np.ndarray, calibrated: np.ndarray, counts) -> list[CalibratedPrediction]:
    return [CalibratedPrediction(r, p, int(k)) for r, p, k in zip(raw, calibrated, counts)]


class NoAdapt:
    """Scores are the frozen detector's own softmax."""

    def __init__(self, classifier_weights, config: StrategyConfig):
        self.c, self.d = np.shape(classifier_weights)
        self.config = config

    def process_batch(self, features, logits) -> list[CalibratedPrediction]:
        _, lg = _check_batch(features, logits, self.d, self.c)
        p = softmax(lg)
        return _predictions(p, p, np.zeros(len(p)))


class PrototypeOnly:
    """Softmax over cosine similarity between raw features and raw bank prototypes."""

    def __init__(self, classifier_weights, config: StrategyConfig):
        self.config = config
        self.bank = MemoryBank.from_classifier(classifier_weights, config.n_m)

    def process_batch(self, features, logits) -> list[CalibratedPrediction]:
        f, lg = _check_batch(features, logits, self.bank.d, self.bank.c)
        self.bank.insert_batch(f, lg)
        p = softmax(cosine_matrix(f, self.bank.prototypes()))
        return _predictions(p, p, np.zeros(len(p)))


class PseudoLabel:
    """Self-training of a copy of the linear head on hardened confident predictions.

    The copy is parameterised as a correction ``delta`` on top of the stored
    logits, so an untouched copy reproduces the base scores exactly.
    """

    def __init__(self, classifier_weights, config: StrategyConfig):
        self.config = config
        self.c, self.d = np.shape(classifier_weights)
        self.delta = np.zeros((self.c, self.d))
        self.adam = AdamState(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)

    def _head(self, f, lg):
        return lg + f @ self.delta.T

    def process_batch(self, features, logits) -> list[CalibratedPrediction]:
        f, lg = _check_batch(features, logits, self.d, self.c)
        p = softmax(self._head(f, lg))
        mask = p.max(axis=1) > self.config.conf
        if mask.any():
            target = np.eye(self.c)[p[mask].argmax(axis=1)]
            for _ in range(self.config.k_s):
                q = softmax(self._head(f[mask], lg[mask]))
                grad = (q - target).T @ f[mask] / mask.sum()
                adam_step({"delta": self.delta}, {"delta": grad}, self.adam)
            p = softmax(self._head(f, lg))
        return _predictions(p, p, np.zeros(len(p)))


@dataclass
class BatchDiagnostics:
    loss: list[float] = field(default_factory=list)
    n_confident: int = 0
    skipped: bool = False
    error: str | None = None


class AdaptationEngine:
    """Memory bank + transform ensemble + nearest-feature calibration, trained online."""

    def __init__(self, classifier_weights, config: StrategyConfig, ensemble: lcpc.TransformEnsemble | None = None):
        config.validate()
        w = np.asarray(classifier_weights, dtype=np.float64)
        if w.ndim != 2 or not np.isfinite(w).all():
            raise InvalidConfigError("classifier weights must be a finite c x d matrix")
        self.config = config
        self.bank = MemoryBank.from_classifier(w, config.n_m)
        d = self.bank.d
        if ensemble is not None:
            if ensemble.d != d:
                raise InvalidConfigError(f"ensemble input dim {ensemble.d} != feature dim {d}")
            self.ensemble = ensemble
        elif config.identity_transform:
            self.ensemble = lcpc.TransformEnsemble.identity(d)
        else:
            self.ensemble = lcpc.new_ensemble(d, config.d_t, config.n_t, config.seed)
        self.adam = AdamState(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
        self.samples_seen = 0
        self.last_diagnostics = BatchDiagnostics()

    @property
    def use_nfc(self) -> bool:
        return self.config.enable_nfc and self.config.n_f > 0

    def _neighbors(self, f: np.ndarray, ids: np.ndarray) -> lcpc.NeighborBatch:
        n = f.shape[0]
        if not self.use_nfc:
            return lcpc.NeighborBatch.empty(n, self.bank.d)
        per_sample = [self.bank.nearest_rows(f[i], self.config.n_f, exclude_id=int(ids[i]))[0] for i in range(n)]
        uniq, inverse = np.unique(np.concatenate(per_sample), return_inverse=True)
        splits = np.cumsum([r.size for r in per_sample])[:-1]
        return lcpc.NeighborBatch(self.bank.features[uniq], np.split(inverse, splits))

    def _predict(self, f, protos, nb: lcpc.NeighborBatch) -> list[CalibratedPrediction]:
        n = f.shape[0]
        allp, _ = lcpc.predict_batch(self.ensemble, np.vstack([f, nb.features]), protos)
        p, pn = allp[:n], allp[n:]
        counts = np.array([rows.size for rows in nb.index])
        cal = p.copy()
        for i, rows in enumerate(nb.index):
            if rows.size:
                cal[i] = (p[i] + pn[rows].sum(axis=0)) / (rows.size + 1)
        return _predictions(p, cal, counts)

    def _train(self, f, lg, protos, nb: lcpc.NeighborBatch) -> BatchDiagnostics:
        cfg = self.config
        diag = BatchDiagnostics()
        alpha = cfg.alpha if self.use_nfc else 0.0
        # nothing confident and no consistency term: the gradient is exactly zero
        if alpha == 0.0 and not lcpc.confident_mask(lg, cfg.conf).any():
            diag.skipped = True
            return diag
        if cfg.reset_optimizer_per_batch:
            self.adam.reset()
        for _ in range(cfg.k_s):
            try:
                res = lcpc.loss_and_gradients(self.ensemble, f, protos, lg, nb if self.use_nfc else None,
                                              cfg.conf, alpha, cfg.nfc_grad_through_neighbors)
            except NumericalError as exc:
                diag.skipped, diag.error = True, str(exc)
                return diag
            diag.loss.append(res.total)
            diag.n_confident = res.n_confident
            adam_step(self.ensemble.params(), {"weight": res.grad_weight, "bias": res.grad_bias}, self.adam)
        return diag

    def process_batch(self, features, logits) -> list[CalibratedPrediction]:
        f, lg = _check_batch(features, logits, self.bank.d, self.bank.c)
        ids = self.bank.insert_batch(f, lg)
        protos = self.bank.prototypes()
        nb = self._neighbors(f, ids)
        preds = self._predict(f, protos, nb)
        if self.config.enable_lcpc_training:
            self.last_diagnostics = self._train(f, lg, protos, nb)
            if self.config.predict_after_update:
                preds = self._predict(f, protos, nb)
        self.samples_seen += f.shape[0]
        return preds


def init_engine(classifier_weights, config: StrategyConfig):
    """Build the strategy object named by ``config.strategy``."""
    config.validate()
    cls = {
        "no_adapt": NoAdapt,
        "prototype_only": PrototypeOnly,
        "pseudo_label": PseudoLabel,
        "ours": AdaptationEngine,
    }[config.strategy]
    return cls(classifier_weights, config)


@dataclass
class EvaluationReport:
    strategy: str
    scores: np.ndarray
    config: dict
    batch_times: list[float]
    auc: float | None = None
    acc: float | None = None
    eer: float | None = None

    @property
    def has_metrics(self) -> bool:
        return self.auc is not None

    @property
    def mean_batch_time(self) -> float:
        return float(np.mean(self.batch_times)) if self.batch_times else 0.0

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "n_samples": int(self.scores.size),
            "auc": self.auc,
            "acc": self.acc,
            "eer": self.eer,
            "metrics_available": self.has_metrics,
            "n_batches": len(self.batch_times),
            "mean_batch_time_s": self.mean_batch_time,
        }


def iter_batches(n: int, batch_size: int) -> Iterable[slice]:
    for start in range(0, n, batch_size):
        yield slice(start, min(start + batch_size, n))


def run_stream(config: StrategyConfig, classifier_weights, features, logits, labels=None,
               positive_class: int = 1, engine=None) -> EvaluationReport:
    """Process a stream in consecutive batches and score it with the calibrated positive probability."""
    config.validate()
    f = np.asarray(features, dtype=np.float64)
    lg = np.asarray(logits, dtype=np.float64)
    if engine is None:
        engine = init_engine(classifier_weights, config)
    if not 0 <= positive_class < lg.shape[1]:
        raise InvalidConfigError(f"positive class {positive_class} outside [0, {lg.shape[1]})")
    scores = np.empty(f.shape[0])
    times = []
    for sl in iter_batches(f.shape[0], config.batch_size):
        t0 = time.perf_counter()
        preds = engine.process_batch(f[sl], lg[sl])
        times.append(time.perf_counter() - t0)
        scores[sl] = [p.calibrated[positive_class] for p in preds]

    report = EvaluationReport(config.strategy, scores, config.to_dict(), times)
    if labels is not None:
        y = np.asarray(labels)
        if y.size and (y >= 0).all():
            try:
                report.auc = metrics.auc(scores, y)
                report.eer = metrics.eer(scores, y)
                report.acc = metrics.acc(scores, y)
            except UndefinedMetricError:
                report.auc = report.eer = report.acc = None
    return report


def with_strategy(config: StrategyConfig, strategy: str, **changes) -> StrategyConfig:
    return replace(config, strategy=strategy, **changes)
