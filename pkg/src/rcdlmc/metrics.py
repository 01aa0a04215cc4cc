"""Weak error, Wasserstein-2 helpers and log-log slope fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ErrorReport",
    "TEST_FUNCTIONS",
    "test_function",
    "weak_error",
    "w2_gaussian_diag",
    "w2_empirical_1d",
    "fit_loglog_slope",
    "saturation_error",
]


def _x1_squared(X):
    return X[..., 0] ** 2


def _first10_squared(X):
    return np.sum(X[..., :10] ** 2, axis=-1)


def _mean_square(X):
    return np.mean(X * X, axis=-1)


TEST_FUNCTIONS = {
    "x1_squared": _x1_squared,
    "first10_squared": _first10_squared,
    "mean_square": _mean_square,
}


def test_function(name):
    """Vectorised test function ``φ: (n, d) -> (n,)`` by name."""
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown test function {name!r}; expected one of {sorted(TEST_FUNCTIONS)}") from None


test_function.__test__ = False  # not a pytest test


@dataclass
class ErrorReport:
    algorithm: str
    h: float
    tau: int | None
    N: int
    M: int
    weak_error: float
    cost: int
    mc_stderr: float


def weak_error(samples, test_fn, exact):
    """``|mean φ(x_i) - exact|`` and the standard error of the sample mean.

    Parameters
    ----------
    samples : ndarray, shape (N, d)
    test_fn : callable or str
    exact : float

    Returns
    -------
    (error, stderr) : tuple of float
    """
    phi = test_function(test_fn) if isinstance(test_fn, str) else test_fn
    vals = np.asarray(phi(np.atleast_2d(samples)), dtype=np.float64)
    n = vals.shape[0]
    if n < 2:
        raise ValueError("weak error needs at least two samples")
    # fsum keeps the mean independent of sample order
    mean = math.fsum(vals) / n
    var = math.fsum((vals - mean) ** 2) / (n - 1)
    return abs(mean - exact), math.sqrt(var / n)


def w2_gaussian_diag(mean1, var1, mean2, var2):
    """W2 between ``N(mean1, diag var1)`` and ``N(mean2, diag var2)``."""
    m1, v1, m2, v2 = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (mean1, var1, mean2, var2))
    if np.any(v1 < 0) or np.any(v2 < 0):
        raise ValueError("variances must be nonnegative")
    dm = np.broadcast_to(m1 - m2, np.broadcast_shapes(m1.shape, m2.shape, v1.shape, v2.shape))
    ds = np.broadcast_to(np.sqrt(v1) - np.sqrt(v2), dm.shape)
    return float(math.sqrt(np.sum(dm * dm) + np.sum(ds * ds)))


def w2_empirical_1d(samples_a, samples_b):
    """Order-statistics W2 between two equal-size 1D samples."""
    a = np.sort(np.ravel(np.asarray(samples_a, dtype=np.float64)))
    b = np.sort(np.ravel(np.asarray(samples_b, dtype=np.float64)))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if a.size != b.size:
        raise ValueError(f"sample sizes differ: {a.size} vs {b.size}")
    return float(math.sqrt(np.mean((a - b) ** 2)))


def fit_loglog_slope(points):
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (h, error) pairs")
    if np.any(~(pts > 0)):
        raise ValueError("h and error must be positive")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    return float(np.polyfit(lx, ly, 1)[0])


def saturation_error(trace, exact, h, mu=1.0, margin=10.0, tail=0.2):
    """Plateau of the weak error once mixing is done.

    Takes the recorded ensemble means ``(m, mean φ, ...)`` with
    ``m·h >= margin/mu``, keeps the last ``tail`` fraction of them, and
    returns ``|average of those means - exact|``.  Averaging the signed
    means first keeps Monte Carlo noise from inflating the plateau.
    """
    means = [row[1] for row in trace if row[0] * h >= margin / mu]
    if not means:
        raise ValueError(f"no recorded points past m·h = {margin / mu}")
    k = max(1, int(math.ceil(tail * len(means))))
    return abs(math.fsum(means[-k:]) / k - exact)
