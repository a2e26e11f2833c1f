"""Toy frozen base detector: a linear softmax classifier on bias-augmented features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..numerics import softmax
from .streams import StreamData, StreamHeader


@dataclass(frozen=True)
class BaseDetector:
    """``extract`` appends a constant 1 so the bias lives in the last weight column."""

    weights: np.ndarray  # (c, d + 1)
    positive_class: int = 1

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def extract(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.hstack([x, np.ones((x.shape[0], 1))])

    def logits(self, features) -> np.ndarray:
        return np.atleast_2d(features) @ self.weights.T

    def to_stream(self, x, labels=None) -> StreamData:
        f = self.extract(x)
        lg = self.logits(f)
        y = np.full(f.shape[0], -1) if labels is None else np.asarray(labels, dtype=np.int64)
        header = StreamHeader(f.shape[1], lg.shape[1], self.positive_class, f.shape[0])
        return StreamData(header, f, lg, y)


def train_base_detector(x, labels, epochs: int = 300, lr: float = 0.5, seed: int = 0,
                        num_classes: int = 2, positive_class: int = 1) -> BaseDetector:
    """Full-batch gradient descent on softmax cross-entropy from a small seeded init."""
    y = np.asarray(labels, dtype=np.int64)
    if np.unique(y).size < 2:
        raise InvalidArgumentError("source data must contain at least two classes")
    x = np.asarray(x, dtype=np.float64)
    f = np.hstack([x, np.ones((x.shape[0], 1))])
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=(num_classes, f.shape[1]))
    onehot = np.eye(num_classes)[y]
    n = f.shape[0]
    for _ in range(epochs):
        p = softmax(f @ w.T)
        w -= lr * ((p - onehot).T @ f) / n
    return BaseDetector(w, positive_class)


def train_accuracy(detector: BaseDetector, x, labels) -> float:
    pred = np.argmax(detector.logits(detector.extract(x)), axis=1)
    return float(np.mean(pred == np.asarray(labels)))
