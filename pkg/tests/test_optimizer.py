import numpy as np
import pytest

from protoadapt.errors import NumericalError
from protoadapt.optimizer import AdamState, adam_step


def test_zero_gradient_fresh_state_no_move():
    p = {"x": np.array([1.0, -2.0])}
    adam_step(p, {"x": np.zeros(2)}, AdamState(lr=0.1))
    np.testing.assert_array_equal(p["x"], [1.0, -2.0])


@pytest.mark.parametrize("g", [3.0, -0.25, 1e-3])
def test_first_step_magnitude(g):
    lr = 1e-2
    p = {"x": np.array([0.0])}
    st = AdamState(lr=lr)
    adam_step(p, {"x": np.array([g])}, st)
    expected = -np.sign(g) * lr * abs(g) / (abs(g) + st.eps)
    assert p["x"][0] == pytest.approx(expected, rel=1e-12)
    assert st.t == 1


def test_deterministic():
    rng = np.random.default_rng(0)
    grads = [rng.normal(size=(3, 2)) for _ in range(10)]
    out = []
    for _ in range(2):
        p = {"w": np.ones((3, 2))}
        st = AdamState(lr=0.01)
        for g in grads:
            adam_step(p, {"w": g}, st)
        out.append(p["w"].tobytes())
    assert out[0] == out[1]


def test_non_finite_gradient_leaves_params():
    p = {"w": np.ones(3)}
    st = AdamState(lr=0.1)
    with pytest.raises(NumericalError):
        adam_step(p, {"w": np.array([1.0, np.nan, 0.0])}, st)
    np.testing.assert_array_equal(p["w"], 1.0)
    assert st.t == 0


def test_quadratic_convergence():
    p = {"x": np.array([1.0])}
    st = AdamState(lr=0.1)
    for _ in range(200):
        adam_step(p, {"x": 2 * p["x"]}, st)
    assert abs(p["x"][0]) < 0.5


def test_elementwise_permutation():
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=6)
    perm = rng.permutation(6)
    a, b = {"x": x0.copy()}, {"x": x0[perm].copy()}
    sa, sb = AdamState(lr=0.05), AdamState(lr=0.05)
    for _ in range(5):
        g = rng.normal(size=6)
        adam_step(a, {"x": g}, sa)
        adam_step(b, {"x": g[perm]}, sb)
    np.testing.assert_array_equal(a["x"][perm], b["x"])
