"""Gaussian-mixture benchmark with a translated target domain and an unseen fake mode.

Source: class 0 ("real") is one Gaussian, class 1 ("fake") mixes two known
sub-clusters. Target: every source cluster is translated by ``shift`` and a
share ``novel_weight`` of the fakes comes from a mode never seen in source.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidConfigError


def _axis(d: int, *pairs: tuple[int, float]) -> list[float]:
    v = np.zeros(d)
    for i, a in pairs:
        v[i % d] += a
    return v.tolist()


@dataclass
class SynthConfig:
    d: int = 16
    n_source: int = 4000
    n_target: int = 2000
    fake_fraction: float = 0.5
    real_mean: list[float] | None = None
    fake_means: list[list[float]] | None = None
    novel_mean: list[float] | None = None
    cluster_scale: float = 1.0
    novel_scale: float = 1.0
    shift: list[float] | float | None = None
    novel_weight: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n_source < 2 or self.n_target < 1:
            raise InvalidConfigError("SynthConfig needs d >= 1, n_source >= 2, n_target >= 1")
        if not 0.0 < self.fake_fraction < 1.0 or not 0.0 <= self.novel_weight <= 1.0:
            raise InvalidConfigError("fake_fraction must lie in (0, 1) and novel_weight in [0, 1]")
        if self.cluster_scale <= 0 or self.novel_scale <= 0:
            raise InvalidConfigError("cluster scales must be positive")
        d = self.d
        if self.real_mean is None:
            self.real_mean = _axis(d, (0, -1.0))
        if self.fake_means is None:
            self.fake_means = [_axis(d, (0, 1.0), (2, 3.0)), _axis(d, (0, 1.0), (2, -3.0))]
        if self.novel_mean is None:
            # no projection on the source fake/real axis: the linear base cannot rank it
            self.novel_mean = _axis(d, (3, 4.0))
        if self.shift is None:
            self.shift = 1.0
        if np.isscalar(self.shift):
            self.shift = _axis(d, (4, float(self.shift)), (5, float(self.shift)))
        for name in ("real_mean", "novel_mean", "shift"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (d,) or not np.isfinite(v).all():
                raise InvalidConfigError(f"{name} must be a finite vector of length {d}")
        fm = np.asarray(self.fake_means, dtype=np.float64)
        if fm.ndim != 2 or fm.shape[1] != d or fm.shape[0] < 1 or not np.isfinite(fm).all():
            raise InvalidConfigError(f"fake_means must be finite vectors of length {d}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthData:
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray
    target_novel: np.ndarray  # True where the sample came from the unseen mode


def _draw(rng, n_real: int, n_fake: int, real_mean, fake_means, scale: float, novel=None):
    """Draw class-0 then class-1 samples; ``novel=(mean, scale, weight)`` mixes in the unseen mode."""
    d = real_mean.size
    xs = [real_mean + scale * rng.standard_normal((n_real, d))]
    ys = [np.zeros(n_real, dtype=np.int64)]
    is_novel = np.zeros(n_fake, dtype=bool)
    if novel is not None:
        is_novel = rng.random(n_fake) < novel[2]
    k = fake_means.shape[0]
    comp = rng.integers(0, k, size=n_fake)
    known = fake_means[comp] + scale * rng.standard_normal((n_fake, d))
    if novel is not None:
        nov = novel[0] + novel[1] * rng.standard_normal((n_fake, d))
        known = np.where(is_novel[:, None], nov, known)
    xs.append(known)
    ys.append(np.ones(n_fake, dtype=np.int64))
    x, y = np.vstack(xs), np.concatenate(ys)
    novel_flag = np.concatenate([np.zeros(n_real, dtype=bool), is_novel])
    order = rng.permutation(y.size)
    return x[order], y[order], novel_flag[order]


def generate_synthetic(cfg: SynthConfig) -> SynthData:
    rng_src, rng_tgt = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(2))
    real = np.asarray(cfg.real_mean, dtype=np.float64)
    fakes = np.asarray(cfg.fake_means, dtype=np.float64)
    shift = np.asarray(cfg.shift, dtype=np.float64)

    n_fake_s = int(round(cfg.n_source * cfg.fake_fraction))
    sx, sy, _ = _draw(rng_src, cfg.n_source - n_fake_s, n_fake_s, real, fakes, cfg.cluster_scale)

    n_fake_t = int(round(cfg.n_target * cfg.fake_fraction))
    novel = (np.asarray(cfg.novel_mean, dtype=np.float64) + shift, cfg.novel_scale, cfg.novel_weight)
    tx, ty, tn = _draw(rng_tgt, cfg.n_target - n_fake_t, n_fake_t, real + shift, fakes + shift,
                       cfg.cluster_scale, novel=novel)
    return SynthData(sx, sy, tx, ty, tn)
