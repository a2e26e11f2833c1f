"""AUC, accuracy and equal error rate for binary scores."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgumentError, UndefinedMetricError


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise InvalidArgumentError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise InvalidArgumentError("empty input")
    if not np.isin(y, (0, 1)).all():
        raise InvalidArgumentError("labels must be 0 or 1")
    return s, y


def _require_both(y: np.ndarray) -> tuple[int, int]:
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("metric needs both positive and negative labels")
    return n_pos, n_neg


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with ties counted as one half."""
    s, y = _prepare(scores, labels)
    n_pos, n_neg = _require_both(y)
    # midranks are multiples of 0.5 so the sum is exact in float64
    rank_sum = rankdata(s)[y == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def acc(scores, labels, threshold: float = 0.5) -> float:
    s, y = _prepare(scores, labels)
    return float(np.mean((s > threshold).astype(np.int64) == y))


def error_rates(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """FPR and FNR when predicting positive for ``score >= t``, for every unique score t.

    A final threshold above the maximum score (everything negative) is appended.
    """
    s, y = _prepare(scores, labels)
    n_pos, n_neg = _require_both(y)
    order = np.argsort(s, kind="mergesort")
    s, y = s[order], y[order]
    thresholds, first = np.unique(s, return_index=True)
    # samples strictly below each threshold are predicted negative
    pos_below = np.concatenate([[0], np.cumsum(y)])[first]
    neg_below = np.concatenate([[0], np.cumsum(1 - y)])[first]
    fnr = np.append(pos_below / n_pos, 1.0)
    fpr = np.append(1.0 - neg_below / n_neg, 0.0)
    thresholds = np.append(thresholds, np.inf)
    return thresholds, fpr, fnr


def eer(scores, labels) -> float:
    """Equal error rate, linearly interpolated where ``FPR - FNR`` changes sign."""
    _, fpr, fnr = error_rates(scores, labels)
    diff = fpr - fnr
    # diff starts at 1 (all positive) and ends at -1 (all negative), non-increasing
    exact = np.flatnonzero(diff == 0.0)
    if exact.size:
        return float(fpr[exact[0]])
    j = int(np.flatnonzero(diff < 0.0)[0])
    i = j - 1
    w = diff[i] / (diff[i] - diff[j])
    return float(fpr[i] + w * (fpr[j] - fpr[i]))
