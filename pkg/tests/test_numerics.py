import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from protoadapt.errors import InvalidArgumentError, NumericalError
from protoadapt.numerics import (
    cosine_sim,
    entropy,
    finite_diff_gradient,
    softmax,
    soft_cross_entropy,
)

finite = st.floats(-50, 50, allow_nan=False)
logit_vecs = arrays(np.float64, st.integers(1, 8), elements=finite)


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(softmax([math.log(2), 0.0]), [2 / 3, 1 / 3], rtol=1e-14)
    np.testing.assert_allclose(softmax([1001.0, 1002.0]), softmax([1.0, 2.0]), rtol=1e-14)


def test_softmax_empty():
    with pytest.raises(InvalidArgumentError):
        softmax([])


def test_entropy_examples():
    assert entropy([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    # mpmath at 50 digits
    assert entropy([10.0, -10.0]) == pytest.approx(4.3284225984118452e-8, rel=1e-9)
    with pytest.raises(InvalidArgumentError):
        entropy([])


def test_cosine_examples():
    assert cosine_sim([3, 4], [3, 4]) == pytest.approx(1.0)
    assert cosine_sim([1, 0], [0, 1]) == 0.0
    assert cosine_sim([1, 2], [-1, -2]) == pytest.approx(-1.0)
    assert cosine_sim([0, 0], [1, 2]) == 0.0
    with pytest.raises(InvalidArgumentError):
        cosine_sim([1, 2], [1, 2, 3])


def test_soft_cross_entropy_examples():
    assert soft_cross_entropy([0.5, 0.5], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert soft_cross_entropy([1.0, 0.0], [1.0, 0.0]) <= 1e-11
    assert soft_cross_entropy([0.9, 0.1], [0.9, 0.1]) == pytest.approx(0.32508297339144824, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        soft_cross_entropy([1.0], [0.5, 0.5])


def test_finite_diff_examples():
    g = finite_diff_gradient(lambda x: float(x[0] ** 2), [3.0], 1e-5)
    assert g[0] == pytest.approx(6.0, abs=1e-6)
    g = finite_diff_gradient(lambda x: 4.2, np.arange(5.0), 1e-5)
    np.testing.assert_allclose(g, 0.0, atol=1e-9)
    with pytest.raises(NumericalError):
        finite_diff_gradient(lambda x: float("nan"), [1.0])
    with pytest.raises(InvalidArgumentError):
        finite_diff_gradient(lambda x: 0.0, [1.0], h=0.0)


def test_finite_diff_matches_softmax_ce_gradient():
    rng = np.random.default_rng(3)
    t = softmax(rng.normal(size=4))
    z = rng.normal(size=4)
    f = lambda v: soft_cross_entropy(t, softmax(v))
    # d/dz CE(t, softmax(z)) = softmax(z) - t
    np.testing.assert_allclose(finite_diff_gradient(f, z, 1e-6), softmax(z) - t, rtol=1e-4, atol=1e-9)


@given(logit_vecs)
def test_softmax_is_distribution(x):
    p = softmax(x)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert ((p >= 0) & (p <= 1)).all()


@given(logit_vecs, finite)
def test_entropy_shift_invariant_and_bounded(x, shift):
    h = entropy(x)
    assert 0.0 <= h <= math.log(x.size) + 1e-12
    assert entropy(x + shift) == pytest.approx(h, abs=1e-10)


@given(arrays(np.float64, 5, elements=st.floats(-10, 10)), arrays(np.float64, 5, elements=st.floats(-10, 10)),
       st.floats(0.01, 100), st.floats(0.01, 100))
def test_cosine_symmetric_scale_invariant(a, b, lam, mu):
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    c = cosine_sim(a, b)
    assert c == cosine_sim(b, a)
    assert cosine_sim(lam * a, mu * b) == pytest.approx(c, abs=1e-12)


@settings(max_examples=200)
@given(arrays(np.float64, 4, elements=st.floats(-8, 8)), arrays(np.float64, 4, elements=st.floats(-8, 8)))
def test_gibbs_inequality(a, b):
    t, p = softmax(a), softmax(b)
    assert soft_cross_entropy(t, p) >= entropy(a) - 1e-9
    assert soft_cross_entropy(t, t) == pytest.approx(entropy(a), abs=1e-9)
