"""Adam over a dict of named numpy parameter arrays, updated in place."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError, NumericalError


@dataclass
class AdamState:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidConfigError("learning rate must be positive")

    def reset(self) -> None:
        self.t = 0
        self.m.clear()
        self.v.clear()


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update. Parameters are untouched if any gradient is non-finite."""
    for k, p in params.items():
        if k not in grads or grads[k].shape != p.shape:
            raise InvalidArgumentError(f"gradient for {k!r} missing or mis-shaped")
        if not np.isfinite(grads[k]).all():
            raise NumericalError(f"non-finite gradient for {k!r}")
        if k in state.m and state.m[k].shape != p.shape:
            raise InvalidArgumentError(f"optimizer state for {k!r} does not match parameter shape")

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for k, p in params.items():
        g = grads[k]
        m = state.m.setdefault(k, np.zeros_like(p))
        v = state.v.setdefault(k, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
