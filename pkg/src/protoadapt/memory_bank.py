"""Entropy-filtered memory bank of past (feature, logits) evidence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError
from .numerics import EPS, entropy

# seed logits are one-hot scaled by this so seeds carry near-zero entropy
SEED_LOGIT_SCALE = 20.0


@dataclass(frozen=True)
class BankEntry:
    id: int
    feature: np.ndarray
    logits: np.ndarray
    entropy: float
    pred_class: int
    is_seed: bool


@dataclass(frozen=True)
class NeighborSet:
    entries: list[BankEntry]
    distances: np.ndarray
    cutoff_distance: float

    @property
    def ids(self) -> list[int]:
        return [e.id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class MemoryBank:
    """Bounded store with per-class capacity ``floor(capacity / num_classes)``.

    Rows are kept in id (arrival) order. Eviction inside a class drops the
    highest-entropy entries first; on equal entropy the older entry goes.
    """

    def __init__(self, feature_dim: int, num_classes: int, capacity: int):
        if num_classes < 2 or feature_dim < 1:
            raise InvalidConfigError("memory bank needs c >= 2 and d >= 1")
        if capacity < num_classes:
            raise InvalidConfigError(f"capacity N_m={capacity} smaller than class count {num_classes}")
        self.d = feature_dim
        self.c = num_classes
        self.capacity = capacity
        self._features = np.empty((0, feature_dim))
        self._logits = np.empty((0, num_classes))
        self._entropy = np.empty(0)
        self._pred = np.empty(0, dtype=np.int64)
        self._ids = np.empty(0, dtype=np.int64)
        self._seed = np.empty(0, dtype=bool)
        self._next_id = 0

    @classmethod
    def from_classifier(cls, weights, capacity: int = 1000) -> "MemoryBank":
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 2:
            raise InvalidArgumentError("classifier weights must be a c x d matrix")
        c, d = w.shape
        bank = cls(d, c, capacity)
        bank._append(w, np.eye(c) * SEED_LOGIT_SCALE, seed=True)
        return bank

    def __len__(self) -> int:
        return self._ids.size

    @property
    def features(self) -> np.ndarray:
        return self._features

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def pred_classes(self) -> np.ndarray:
        return self._pred

    @property
    def entropies(self) -> np.ndarray:
        return self._entropy

    @property
    def next_id(self) -> int:
        return self._next_id

    def entry(self, row: int) -> BankEntry:
        return BankEntry(
            id=int(self._ids[row]),
            feature=self._features[row].copy(),
            logits=self._logits[row].copy(),
            entropy=float(self._entropy[row]),
            pred_class=int(self._pred[row]),
            is_seed=bool(self._seed[row]),
        )

    def entries(self) -> list[BankEntry]:
        return [self.entry(i) for i in range(len(self))]

    def row_of(self, entry_id: int) -> int:
        row = int(np.searchsorted(self._ids, entry_id))
        if row >= len(self) or self._ids[row] != entry_id:
            raise KeyError(entry_id)
        return row

    def _append(self, features: np.ndarray, logits: np.ndarray, seed: bool) -> np.ndarray:
        n = features.shape[0]
        ids = np.arange(self._next_id, self._next_id + n, dtype=np.int64)
        self._next_id += n
        self._features = np.vstack([self._features, features])
        self._logits = np.vstack([self._logits, logits])
        self._entropy = np.concatenate([self._entropy, np.atleast_1d(entropy(logits))])
        # argmax already breaks ties toward the lowest index
        self._pred = np.concatenate([self._pred, np.argmax(logits, axis=1)])
        self._ids = np.concatenate([self._ids, ids])
        self._seed = np.concatenate([self._seed, np.full(n, seed)])
        return ids

    def insert_batch(self, features, logits) -> np.ndarray:
        """Append records, then enforce capacity. Returns the assigned ids
        (an id may already be evicted when this returns)."""
        f = np.asarray(features, dtype=np.float64)
        lg = np.asarray(logits, dtype=np.float64)
        if f.size == 0 and lg.size == 0:
            return np.empty(0, dtype=np.int64)
        f, lg = np.atleast_2d(f), np.atleast_2d(lg)
        if f.ndim != 2 or f.shape[1] != self.d:
            raise InvalidArgumentError(f"feature length must be {self.d}, got shape {f.shape}")
        if lg.ndim != 2 or lg.shape[1] != self.c:
            raise InvalidArgumentError(f"logit length must be {self.c}, got shape {lg.shape}")
        if f.shape[0] != lg.shape[0]:
            raise InvalidArgumentError("features and logits differ in record count")
        if f.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        ids = self._append(f, lg, seed=False)
        self.enforce_capacity()
        return ids

    def enforce_capacity(self) -> None:
        cap = self.capacity // self.c
        keep = np.ones(len(self), dtype=bool)
        for k in range(self.c):
            rows = np.flatnonzero(self._pred == k)
            if rows.size <= cap:
                continue
            # lowest entropy first, newest first among equals
            order = np.lexsort((-self._ids[rows], self._entropy[rows]))
            keep[rows[order[max(cap, 1):]]] = False
        if keep.all():
            return
        self._features = self._features[keep]
        self._logits = self._logits[keep]
        self._entropy = self._entropy[keep]
        self._pred = self._pred[keep]
        self._ids = self._ids[keep]
        self._seed = self._seed[keep]

    def class_prototype(self, k: int) -> np.ndarray:
        if not 0 <= k < self.c:
            raise InvalidArgumentError(f"class index {k} out of range [0, {self.c})")
        return self._features[self._pred == k].mean(axis=0)

    def prototypes(self) -> np.ndarray:
        return np.stack([self.class_prototype(k) for k in range(self.c)])

    def cosine_distances(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.d,):
            raise InvalidArgumentError(f"query must have length {self.d}, got {q.shape}")
        qn = max(float(np.linalg.norm(q)), EPS)
        fn = np.maximum(np.linalg.norm(self._features, axis=1), EPS)
        return 1.0 - np.clip(self._features @ q / (fn * qn), -1.0, 1.0)

    def nearest_rows(self, query, n_f: int, exclude_id: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Rows of the ``n_f`` closest entries (cosine distance, ties by smaller id)."""
        if n_f < 0:
            raise InvalidArgumentError("N_f must be non-negative")
        dist = self.cosine_distances(query)
        rows = np.arange(len(self))
        if exclude_id is not None:
            mask = self._ids != exclude_id
            rows, dist = rows[mask], dist[mask]
        order = np.lexsort((self._ids[rows], dist))[:n_f]
        return rows[order], dist[order]

    def nearest(self, query, n_f: int, exclude_id: int | None = None) -> NeighborSet:
        rows, dist = self.nearest_rows(query, n_f, exclude_id)
        cutoff = float(dist[-1]) if dist.size else 0.0
        return NeighborSet([self.entry(r) for r in rows], dist, cutoff)

    def snapshot_records(self):
        """(features, logits) arrays for dumping with :mod:`protoadapt.data_io`."""
        return self._features.copy(), self._logits.copy()
