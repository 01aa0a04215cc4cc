import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcdlmc.metrics import (
    fit_loglog_slope,
    saturation_error,
    test_function,
    w2_empirical_1d,
    w2_gaussian_diag,
    weak_error,
)
from rcdlmc.rng import ChainStreams


def test_named_test_functions():
    X = np.arange(24.0).reshape(2, 12)
    np.testing.assert_array_equal(test_function("x1_squared")(X), [0.0, 144.0])
    np.testing.assert_array_equal(test_function("first10_squared")(X), np.sum(X[:, :10] ** 2, axis=1))
    np.testing.assert_array_equal(test_function("mean_square")(X), np.mean(X**2, axis=1))
    with pytest.raises(ValueError):
        test_function("x2_cubed")


def test_weak_error_at_exact_point():
    X = np.tile([1.0, 2.0], (5, 1))
    err, se = weak_error(X, "x1_squared", 1.0)
    assert err == 0.0 and se == 0.0


def test_weak_error_chi_square():
    n = 1_000_000
    X = ChainStreams(11, np.arange(n)).normals(0, 1)
    err, se = weak_error(X, "x1_squared", 1.0)
    assert err <= 4 * math.sqrt(2 / n)
    assert se == pytest.approx(math.sqrt(2 / n), rel=0.02)


def test_weak_error_needs_two_samples():
    with pytest.raises(ValueError):
        weak_error(np.zeros((1, 3)), "x1_squared", 0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_weak_error_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((257, 3)) * 10 ** rng.uniform(-3, 3)
    a = weak_error(X, "mean_square", 0.7)
    b = weak_error(X[rng.permutation(257)], "mean_square", 0.7)
    assert a[0] == b[0]


def test_w2_gaussian_examples():
    assert w2_gaussian_diag(np.ones(3), np.ones(3), np.ones(3), np.ones(3)) == 0.0
    d = 1000
    assert w2_gaussian_diag(np.full(d, 0.5), np.ones(d), np.zeros(d), np.ones(d)) == pytest.approx(0.5 * math.sqrt(d))
    assert w2_gaussian_diag(0.0, 1.0, 0.0, 4.0) == 1.0
    with pytest.raises(ValueError):
        w2_gaussian_diag(0.0, -1.0, 0.0, 1.0)


vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)
var = st.lists(st.floats(0, 10), min_size=3, max_size=3).map(np.array)


@settings(max_examples=100, deadline=None)
@given(m1=vec, v1=var, m2=vec, v2=var, m3=vec, v3=var)
def test_w2_gaussian_metric_axioms(m1, v1, m2, v2, m3, v3):
    ab = w2_gaussian_diag(m1, v1, m2, v2)
    assert ab == w2_gaussian_diag(m2, v2, m1, v1)
    assert ab >= 0
    assert w2_gaussian_diag(m1, v1, m1, v1) == 0
    assert ab <= w2_gaussian_diag(m1, v1, m3, v3) + w2_gaussian_diag(m3, v3, m2, v2) + 1e-12


def test_w2_empirical_examples(rng):
    a = rng.standard_normal(100)
    assert w2_empirical_1d(a, rng.permutation(a)) == 0.0
    assert w2_empirical_1d(a + 2.5, a) == pytest.approx(2.5, rel=1e-14)
    with pytest.raises(ValueError):
        w2_empirical_1d([], [])
    with pytest.raises(ValueError):
        w2_empirical_1d([1.0], [1.0, 2.0])


def test_w2_empirical_shifted_normals_bootstrap():
    rng = np.random.default_rng(21)
    n = 100_000
    a, b = rng.standard_normal(n), 1.0 + rng.standard_normal(n)
    est = w2_empirical_1d(a, b)
    boot = [w2_empirical_1d(rng.choice(a, n), rng.choice(b, n)) for _ in range(50)]
    assert abs(est - 1.0) < 3 * np.std(boot)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-100, 100))
def test_w2_empirical_translation(seed, c):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    base = w2_empirical_1d(a, b)
    assert base >= 0
    # shifting both samples leaves the distance alone
    assert w2_empirical_1d(a + c, b + c) == pytest.approx(base, rel=1e-9, abs=1e-9 * (1 + abs(c)))


def test_slope_examples():
    hs = [0.01, 0.02, 0.04, 0.08]
    assert fit_loglog_slope([(h, 3 * h * h) for h in hs]) == pytest.approx(2.0, abs=1e-12)
    assert fit_loglog_slope([(h, 0.5 * h) for h in hs]) == pytest.approx(1.0, abs=1e-12)
    assert fit_loglog_slope([(0.1, 0.011), (0.2, 0.021), (0.4, 0.039)]) == pytest.approx(0.92, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(-3, 3), c=st.floats(1e-3, 1e3))
def test_slope_exact_on_power_laws(p, c):
    pts = [(h, c * h**p) for h in (1e-3, 1e-2, 0.1, 0.5)]
    assert fit_loglog_slope(pts) == pytest.approx(p, abs=1e-9)


def test_slope_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_loglog_slope([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        fit_loglog_slope([(0.1, 1.0), (0.2, 0.0), (0.4, 3.0)])


def test_saturation_error_averages_plateau():
    h = 0.1
    # mixing margin m·h >= 10 starts at m = 100; 10 points pass, last 2 kept
    trace = [(m, 5.0 if m < 100 else 1.0 + (0.1 if m >= 180 else 0.0), 0.0) for m in range(0, 200, 10)]
    assert saturation_error(trace, 1.0, h) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        saturation_error(trace[:5], 1.0, h)
