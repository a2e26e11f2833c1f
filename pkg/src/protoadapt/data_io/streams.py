"""FTS1 binary feature streams, a CSV variant, and classifier weight files.

FTS1 layout (little-endian)::

    b"FTS1" | u32 version=1 | u32 d | u32 c | u32 positive_class | u64 record_count
    record_count x ( d float32 feature | c float32 logits | i8 label )

Weight files use magic ``b"FTW1"`` with the same header fields except
record_count, followed by ``c * d`` float32 values in row-major order.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..errors import FormatError, InvalidArgumentError

STREAM_MAGIC = b"FTS1"
WEIGHTS_MAGIC = b"FTW1"
VERSION = 1
_STREAM_HEADER = struct.Struct("<4sIIIIQ")
_WEIGHTS_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class StreamHeader:
    d: int
    c: int
    positive_class: int
    record_count: int
    version: int = VERSION

    def __post_init__(self):
        if self.d < 1 or self.c < 1:
            raise InvalidArgumentError("stream dimensions must be positive")
        if not 0 <= self.positive_class < self.c:
            raise InvalidArgumentError(f"positive_class {self.positive_class} outside [0, {self.c})")


@dataclass(frozen=True)
class FeatureRecord:
    feature: np.ndarray
    logits: np.ndarray
    label: int = -1


@dataclass
class StreamData:
    """A whole stream held in memory; ``labels`` uses -1 for unknown."""

    header: StreamHeader
    features: np.ndarray
    logits: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def has_labels(self) -> bool:
        return len(self) > 0 and bool((self.labels >= 0).all())

    def records(self) -> Iterator[FeatureRecord]:
        for f, lg, y in zip(self.features, self.logits, self.labels):
            yield FeatureRecord(f, lg, int(y))

    @classmethod
    def from_arrays(cls, features, logits, labels=None, positive_class: int = 1) -> "StreamData":
        f = np.asarray(features, dtype=np.float64)
        lg = np.asarray(logits, dtype=np.float64)
        y = np.full(f.shape[0], -1, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
        header = StreamHeader(f.shape[1], lg.shape[1], positive_class, f.shape[0])
        if lg.shape[0] != f.shape[0] or y.shape != (f.shape[0],):
            raise InvalidArgumentError("features, logits and labels differ in length")
        return cls(header, f, lg, y)


def _record_dtype(d: int, c: int) -> np.dtype:
    return np.dtype([("feature", "<f4", (d,)), ("logits", "<f4", (c,)), ("label", "i1")])


def write_stream(path: str | os.PathLike, header: StreamHeader, features, logits, labels=None) -> None:
    f = np.asarray(features, dtype=np.float64).reshape(-1, header.d)
    lg = np.asarray(logits, dtype=np.float64).reshape(-1, header.c)
    n = f.shape[0]
    y = np.full(n, -1) if labels is None else np.asarray(labels)
    if lg.shape[0] != n or y.shape != (n,) or n != header.record_count:
        raise InvalidArgumentError("header record_count does not match the records")
    if not np.isin(y, (-1, 0, 1)).all():
        raise InvalidArgumentError("labels must be -1, 0 or 1")
    rec = np.empty(n, dtype=_record_dtype(header.d, header.c))
    rec["feature"] = f
    rec["logits"] = lg
    rec["label"] = y
    with open(path, "wb") as fh:
        fh.write(_STREAM_HEADER.pack(STREAM_MAGIC, header.version, header.d, header.c,
                                     header.positive_class, n))
        fh.write(rec.tobytes())


def _read_header(fh) -> StreamHeader:
    raw = fh.read(_STREAM_HEADER.size)
    if len(raw) < 4 or raw[:4] != STREAM_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {STREAM_MAGIC!r}")
    if len(raw) < _STREAM_HEADER.size:
        raise FormatError("truncated stream header")
    _, version, d, c, pos, count = _STREAM_HEADER.unpack(raw)
    if version != VERSION:
        raise FormatError(f"unsupported stream version {version}")
    try:
        return StreamHeader(d, c, pos, count, version)
    except InvalidArgumentError as exc:
        raise FormatError(str(exc)) from exc


def iter_stream(path: str | os.PathLike) -> tuple[StreamHeader, Iterator[FeatureRecord]]:
    """Open a stream for a single sequential pass."""
    fh = open(path, "rb")
    try:
        header = _read_header(fh)
    except Exception:
        fh.close()
        raise
    dt = _record_dtype(header.d, header.c)

    def records() -> Iterator[FeatureRecord]:
        with fh:
            for i in range(header.record_count):
                raw = fh.read(dt.itemsize)
                if len(raw) < dt.itemsize:
                    raise FormatError(f"truncated stream: record {i} of {header.record_count} incomplete")
                r = np.frombuffer(raw, dtype=dt)[0]
                yield FeatureRecord(r["feature"].astype(np.float64), r["logits"].astype(np.float64), int(r["label"]))

    return header, records()


def read_stream(path: str | os.PathLike) -> StreamData:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        dt = _record_dtype(header.d, header.c)
        body = fh.read(dt.itemsize * header.record_count)
    n_full = len(body) // dt.itemsize
    if n_full < header.record_count:
        raise FormatError(f"truncated stream: record {n_full} of {header.record_count} incomplete")
    rec = np.frombuffer(body, dtype=dt)
    return StreamData(header, rec["feature"].astype(np.float64), rec["logits"].astype(np.float64),
                      rec["label"].astype(np.int64))


def write_csv_stream(path: str | os.PathLike, data: StreamData) -> None:
    h = data.header
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([h.d, h.c, h.positive_class])
        for f, lg, y in zip(data.features, data.logits, data.labels):
            w.writerow([repr(float(v)) for v in f] + [repr(float(v)) for v in lg] + [int(y)])


def read_csv_stream(path: str | os.PathLike) -> StreamData:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise FormatError("CSV stream must start with a 'd,c,positive_class' line")
    try:
        d, c, pos = (int(v) for v in rows[0])
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, d + c + 1)
    except ValueError as exc:
        raise FormatError(f"malformed CSV stream: {exc}") from exc
    for i, r in enumerate(rows[1:]):
        if len(r) != d + c + 1:
            raise FormatError(f"CSV record {i} has {len(r)} fields, expected {d + c + 1}")
    header = StreamHeader(d, c, pos, body.shape[0])
    return StreamData(header, body[:, :d], body[:, d:d + c], body[:, -1].astype(np.int64))


def write_weights(path: str | os.PathLike, weights, positive_class: int = 1) -> None:
    w = np.asarray(weights, dtype=np.float64)
    c, d = w.shape
    with open(path, "wb") as fh:
        fh.write(_WEIGHTS_HEADER.pack(WEIGHTS_MAGIC, VERSION, d, c, positive_class))
        fh.write(w.astype("<f4").tobytes())


def read_weights(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Returns ``(weights[c, d], positive_class)``."""
    with open(path, "rb") as fh:
        raw = fh.read(_WEIGHTS_HEADER.size)
        if raw[:4] != WEIGHTS_MAGIC or len(raw) < _WEIGHTS_HEADER.size:
            raise FormatError(f"{path}: not a weights file")
        _, version, d, c, pos = _WEIGHTS_HEADER.unpack(raw)
        if version != VERSION:
            raise FormatError(f"unsupported weights version {version}")
        body = fh.read()
    if len(body) < 4 * c * d:
        raise FormatError(f"{path}: truncated weight matrix")
    return np.frombuffer(body[:4 * c * d], dtype="<f4").astype(np.float64).reshape(c, d), pos
