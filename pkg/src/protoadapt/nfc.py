"""Nearest-feature calibration: average a prediction with its neighbours'."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .numerics import EPS


@dataclass(frozen=True)
class CalibratedPrediction:
    raw: np.ndarray
    calibrated: np.ndarray
    neighbor_count: int


def _stack(p: np.ndarray, neighbor_preds) -> np.ndarray:
    nb = np.asarray(neighbor_preds, dtype=np.float64)
    if nb.size == 0:
        return nb.reshape(0, p.size)
    nb = np.atleast_2d(nb)
    if nb.shape[1] != p.size:
        raise InvalidArgumentError(f"neighbour predictions have {nb.shape[1]} classes, expected {p.size}")
    return nb


def calibrate(p, neighbor_preds) -> CalibratedPrediction:
    p = np.asarray(p, dtype=np.float64)
    nb = _stack(p, neighbor_preds)
    calibrated = (p + nb.sum(axis=0)) / (nb.shape[0] + 1)
    return CalibratedPrediction(p, calibrated, nb.shape[0])


def consistency_loss(p, neighbor_preds) -> float:
    """Sum over neighbours of CE(neighbour -> p); zero without neighbours."""
    p = np.asarray(p, dtype=np.float64)
    nb = _stack(p, neighbor_preds)
    return float(-(nb * np.log(np.maximum(p, EPS))).sum())
