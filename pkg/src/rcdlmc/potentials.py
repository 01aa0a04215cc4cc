"""Potential oracles ``f`` with per-coordinate partial derivatives.

A target density is ``p(x) ∝ exp(-f(x))``.  Samplers only ever touch ``f``
through :meth:`Potential.partial` and :meth:`Potential.grad`, and every call
is charged to :attr:`Potential.evals` in partial-derivative units: one
partial derivative costs 1, a full gradient costs ``d``.  The charge is per
oracle call, not per flop -- the mixture's partial derivative reads all
coordinates through ``sum(x)`` and still costs 1.

All oracles accept a single point of shape ``(d,)`` or a batch of shape
``(n, d)``; a batch of ``n`` rows is charged ``n`` calls.

New targets subclass :class:`Potential` and implement ``_value`` and
``_partial`` (and optionally a faster ``_grad`` that must agree bit-for-bit
with stacking ``_partial``).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EvalCounter",
    "Potential",
    "IsotropicGaussian",
    "DoubleGaussian",
    "GlmPosterior",
    "GlmDataset",
    "NoClosedForm",
    "make_isotropic_gaussian",
    "make_double_gaussian",
    "make_glm_posterior",
    "synth_glm_data",
    "analytic_moment",
    "power_iteration",
]


class NoClosedForm(ValueError):
    """Raised when a moment has no closed form; use a long-run reference chain."""


class EvalCounter:
    """Monotone, thread-safe count of partial-derivative evaluations."""

    def __init__(self):
        self._value = 0
        self._lock = threading.Lock()

    def add(self, units):
        units = int(units)
        if units < 0:
            raise ValueError("eval counter cannot be decremented")
        with self._lock:
            self._value += units

    @property
    def value(self):
        return self._value

    def __int__(self):
        return self._value

    def __repr__(self):
        return f"EvalCounter({self._value})"


class Potential:
    """Base class for ``f: R^d -> R`` with counted partial-derivative oracles.

    Parameters
    ----------
    d : int
        Dimension.
    mu, lip_grad, lip_hess : float, optional
        Strong convexity constant, gradient Lipschitz constant and Hessian
        Lipschitz constant.  Pure metadata for the bound calculators; leave
        them unset for targets that violate the assumptions.
    """

    kind = "custom"

    def __init__(self, d, mu=None, lip_grad=None, lip_hess=None):
        d = int(d)
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        for name, val in (("mu", mu), ("lip_grad", lip_grad)):
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if lip_hess is not None and lip_hess < 0:
            raise ValueError(f"lip_hess must be nonnegative, got {lip_hess}")
        if mu is not None and lip_grad is not None and lip_grad < mu:
            raise ValueError(f"lip_grad={lip_grad} < mu={mu}; condition number must be >= 1")
        self.d = d
        self.mu = mu
        self.lip_grad = lip_grad
        self.lip_hess = lip_hess
        self.evals = EvalCounter()

    @property
    def kappa(self):
        if self.mu is None or self.lip_grad is None:
            return None
        return self.lip_grad / self.mu

    def params(self):
        """Constructor parameters, for serialising the target."""
        return {}

    # -- public oracles -------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d or x.ndim not in (1, 2):
            raise ValueError(f"expected shape (d,) or (n, d) with d={self.d}, got {x.shape}")
        return x

    def value(self, x):
        x = self._check(x)
        out = self._value(np.atleast_2d(x))
        return out[0] if x.ndim == 1 else out

    def partial(self, x, i):
        """``∂_i f(x)``; ``i`` is a scalar or one index per row."""
        x = self._check(x)
        X = np.atleast_2d(x)
        idx = np.broadcast_to(np.asarray(i, dtype=np.int64), (X.shape[0],))
        if idx.size and (idx.min() < 0 or idx.max() >= self.d):
            raise IndexError(f"coordinate index out of range 0..{self.d - 1}")
        self.evals.add(X.shape[0])
        out = self._partial(X, idx)
        return out[0] if x.ndim == 1 else out

    def grad(self, x):
        """Full gradient, charged ``d`` units per row."""
        x = self._check(x)
        X = np.atleast_2d(x)
        self.evals.add(X.shape[0] * self.d)
        out = self._grad(X)
        return out[0] if x.ndim == 1 else out

    # -- extension points -----------------------------------------------

    def _value(self, X):
        raise NotImplementedError

    def _partial(self, X, idx):
        raise NotImplementedError

    def _grad(self, X):
        n = X.shape[0]
        G = np.empty_like(X)
        for j in range(self.d):
            G[:, j] = self._partial(X, np.full(n, j, dtype=np.int64))
        return G


class IsotropicGaussian(Potential):
    """``f(x) = |x - center|^2 / 2``."""

    kind = "gaussian"

    def __init__(self, d, center=0.0):
        super().__init__(d, mu=1.0, lip_grad=1.0, lip_hess=0.0)
        c = np.broadcast_to(np.asarray(center, dtype=np.float64), (self.d,))
        self.center = np.array(c)

    def params(self):
        c = self.center
        return {"center": float(c[0]) if np.all(c == c[0]) else c.tolist()}

    def _value(self, X):
        return 0.5 * np.sum((X - self.center) ** 2, axis=-1)

    def _partial(self, X, idx):
        rows = np.arange(X.shape[0])
        return X[rows, idx] - self.center[idx]

    def _grad(self, X):
        return X - self.center


class DoubleGaussian(Potential):
    """Equal-weight mixture of ``N(+offset·1, I)`` and ``N(-offset·1, I)``.

    ``∂_i f(x) = x_i - offset·tanh(offset·Σ_j x_j)``.  Not strongly convex,
    so ``mu``/``lip_grad`` are left unset.
    """

    kind = "mixture"

    def __init__(self, d, offset=2.0):
        if not offset > 0:
            raise ValueError(f"offset must be positive, got {offset}")
        super().__init__(d)
        self.offset = float(offset)

    def params(self):
        return {"offset": self.offset}

    def _value(self, X):
        a = self.offset
        sq = np.sum(X * X, axis=-1)
        s = np.sum(X, axis=-1)
        # -log(e^{-|x-a1|^2/2} + e^{-|x+a1|^2/2}), constant d·a²/2 dropped
        return 0.5 * sq - np.logaddexp(a * s, -a * s)

    def _pull(self, X):
        return self.offset * np.tanh(self.offset * np.sum(X, axis=-1))

    def _partial(self, X, idx):
        rows = np.arange(X.shape[0])
        return X[rows, idx] - self._pull(X)

    def _grad(self, X):
        return X - self._pull(X)[:, None]


NOISE_MODELS = ("gaussian", "cosine_perturbed")


@dataclass
class GlmDataset:
    """Regression data ``b_i = x·a_i + η_i``."""

    features: np.ndarray
    responses: np.ndarray
    noise_model: str = "gaussian"
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.responses = np.atleast_1d(np.asarray(self.responses, dtype=np.float64))
        if self.features.shape[0] != self.responses.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature vectors but {self.responses.shape[0]} responses"
            )
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"noise_model must be one of {NOISE_MODELS}, got {self.noise_model!r}")

    @property
    def d(self):
        return self.features.shape[1]

    def __len__(self):
        return self.responses.shape[0]


def power_iteration(S, rtol=1e-8, max_iter=100_000):
    """Largest eigenvalue of a symmetric PSD matrix."""
    S = np.asarray(S, dtype=np.float64)
    v = np.ones(S.shape[0]) / np.sqrt(S.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / norm
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    raise RuntimeError("power iteration did not converge")


class GlmPosterior(Potential):
    """Posterior of a linear model with ``N(0, I)`` prior.

    ``f(x) = |x|^2/2 + Σ_i g(b_i - x·a_i)`` with ``g(η) = η²/2`` (Gaussian
    noise) or ``g(η) = (η² + cos η)/2`` (cosine-perturbed noise).
    """

    kind = "glm"

    def __init__(self, data):
        A = data.features
        lam = power_iteration(A.T @ A) if len(data) else 0.0
        if data.noise_model == "gaussian":
            lip_grad, lip_hess = 1.0 + lam, 0.0
        else:
            # g'' = (2 - cos η)/2 ∈ [1/2, 3/2], |g'''| <= 1/2
            lip_grad = 1.0 + 1.5 * lam
            lip_hess = 0.5 * float(np.sum(np.linalg.norm(A, axis=1) ** 3))
        super().__init__(data.d, mu=1.0, lip_grad=lip_grad, lip_hess=lip_hess)
        self.data = data
        self._A = np.ascontiguousarray(A)
        self._AT = np.ascontiguousarray(A.T)
        self._b = data.responses
        self._cos = data.noise_model == "cosine_perturbed"

    def params(self):
        return {"noise_model": self.data.noise_model, "count": len(self.data), "seed": self.data.seed}

    def _residuals(self, X):
        return self._b - np.einsum("nd,id->ni", X, self._A)

    def _g(self, eta):
        if self._cos:
            return 0.5 * (eta * eta + np.cos(eta))
        return 0.5 * eta * eta

    def _dg(self, eta):
        if self._cos:
            return 0.5 * (2.0 * eta - np.sin(eta))
        return eta

    def _value(self, X):
        return 0.5 * np.sum(X * X, axis=-1) + np.sum(self._g(self._residuals(X)), axis=-1)

    def _partial(self, X, idx):
        w = self._dg(self._residuals(X))
        rows = np.arange(X.shape[0])
        return X[rows, idx] - np.sum(w * self._AT[idx], axis=-1)

    def _grad(self, X):
        # same reduction as _partial, one column at a time, so results match bit-for-bit
        w = self._dg(self._residuals(X))
        G = np.empty_like(X)
        for j in range(self.d):
            G[:, j] = X[:, j] - np.sum(w * self._AT[j], axis=-1)
        return G

    def posterior_gaussian(self):
        """Exact ``(mean, covariance)`` when the noise is Gaussian."""
        if self._cos:
            raise NoClosedForm("cosine-perturbed noise: no closed form; use long-run reference chain")
        A, b = self._A, self._b
        P = np.eye(self.d) + A.T @ A
        cov = np.linalg.inv(P)
        return cov @ (A.T @ b), cov


def make_isotropic_gaussian(d, center=0.0):
    return IsotropicGaussian(d, center)


def make_double_gaussian(d, offset=2.0):
    return DoubleGaussian(d, offset)


def make_glm_posterior(data):
    if len(data) == 0:
        raise ValueError("dataset is empty")
    return GlmPosterior(data)


def _cosine_noise(rng, size):
    # density ∝ exp(-(η² + cos η)/2) = φ(η)·exp(-cos(η)/2); envelope ratio <= e^{1/2}
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        eta = rng.standard_normal(2 * need + 16)
        u = rng.random(eta.shape[0])
        keep = eta[u < np.exp(-0.5 * (np.cos(eta) + 1.0))][:need]
        out[filled : filled + keep.shape[0]] = keep
        filled += keep.shape[0]
    return out


def synth_glm_data(d, count, x_true=1.0, noise_model="gaussian", seed=0, noise_scale=1.0):
    """Draw ``count`` pairs ``(a_i, b_i)`` with ``a_i ~ N(0, I_d)``.

    ``noise_scale=0`` switches the noise off (test hook); the noise is still
    drawn so the features do not change.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if noise_model not in NOISE_MODELS:
        raise ValueError(f"noise_model must be one of {NOISE_MODELS}, got {noise_model!r}")
    rng = np.random.default_rng(seed)
    x_true = np.broadcast_to(np.asarray(x_true, dtype=np.float64), (d,))
    A = rng.standard_normal((count, d))
    if noise_model == "gaussian":
        eta = rng.standard_normal(count)
    else:
        eta = _cosine_noise(rng, count)
    b = A @ x_true + noise_scale * eta
    return GlmDataset(A, b, noise_model, seed=seed)


TEST_FUNCTIONS = ("x1_squared", "first10_squared", "mean_square")


def analytic_moment(target, test_fn, *, offset=2.0, center=0.0, d=None, potential=None):
    """Exact ``E_p[φ]`` for the supported ``(target, test_fn)`` pairs.

    ``target`` is ``"gaussian"`` (centred at ``center``), ``"mixture"``
    (``±offset`` double Gaussian) or ``"glm"`` (needs ``potential``; Gaussian
    noise only).  ``test_fn`` is one of ``x1_squared`` (``x_1²``),
    ``first10_squared`` (``Σ_{i≤10} x_i²``) or ``mean_square`` (``|x|²/d``).
    """
    if test_fn not in TEST_FUNCTIONS:
        raise NoClosedForm(f"unknown test function {test_fn!r}")
    if target == "gaussian":
        c = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if c.size == 1 and d is not None:
            c = np.full(d, c[0])
        second = 1.0 + c * c
        if test_fn == "x1_squared":
            return float(second[0])
        if test_fn == "first10_squared":
            if c.size == 1:
                return float(min(10, d or 10) * second[0])
            return float(np.sum(second[:10]))
        return float(np.mean(second))
    if target == "mixture":
        per = 1.0 + offset * offset
        first10 = min(10, d or 10) * per
        return {"x1_squared": per, "first10_squared": first10, "mean_square": per}[test_fn]
    if target == "glm":
        if potential is None:
            raise ValueError("glm moments need the posterior potential")
        mean, cov = potential.posterior_gaussian()
        second = mean * mean + np.diag(cov)
        if test_fn == "x1_squared":
            return float(second[0])
        if test_fn == "first10_squared":
            return float(np.sum(second[:10]))
        return float(np.mean(second))
    raise NoClosedForm(f"no closed form for {target!r}; use long-run reference chain")
