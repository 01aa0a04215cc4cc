"""Gradient fluxes ``F^m`` for full-gradient, RCD, SVRG and RCAD samplers.

Every flux function works on one point ``x`` of shape ``(d,)`` with a scalar
coordinate ``r``, or on a batch of chains ``(n, d)`` with one coordinate per
row.  Coordinates are 0-based.  ``Flux.charged`` is the per-chain cost of
the step in partial-derivative units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SelectionDistribution",
    "Flux",
    "SvrgState",
    "RcadState",
    "full_flux",
    "rcd_flux",
    "svrg_flux",
    "rcad_flux",
    "rcd_variance_exact",
    "flux_error",
    "make_estimator",
]


class SelectionDistribution:
    """Coordinate-selection probabilities ``φ_i > 0`` summing to 1."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("selection probabilities must be a nonempty vector")
        if np.any(~(p > 0)):
            raise ValueError("selection probabilities must all be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"selection probabilities sum to {p.sum()!r}, not 1")
        self.probs = p
        self.cdf = np.cumsum(p)
        self.cdf[-1] = 1.0

    @classmethod
    def uniform(cls, d):
        return cls(np.full(d, 1.0 / d))

    @property
    def d(self):
        return self.probs.size

    @property
    def is_uniform(self):
        return bool(np.all(self.probs == self.probs[0]))

    def __eq__(self, other):
        return isinstance(other, SelectionDistribution) and np.array_equal(self.probs, other.probs)


class Flux:
    """Flux vector ``F`` and the per-chain cost of the step.

    A single-coordinate flux may be built sparsely with
    :meth:`single`; ``F`` is then materialised on first access.
    """

    def __init__(self, F, charged):
        self._F = F
        self.charged = charged
        self.coords = None
        self.values = None

    @classmethod
    def single(cls, coords, values, d, charged=1):
        flux = cls(None, charged)
        flux.coords, flux.values, flux.d = coords, values, d
        return flux

    @property
    def sparse(self):
        return self._F is None

    @property
    def F(self):
        if self._F is None:
            F = np.zeros((self.coords.shape[0], self.d))
            F[np.arange(F.shape[0]), self.coords] = self.values
            self._F = F
        return self._F

    def __repr__(self):
        return f"Flux(F={self.F!r}, charged={self.charged})"


@dataclass
class SvrgState:
    """Anchor ``x̃``, anchor gradient ``ĝ = ∇f(x̃)`` and epoch length ``tau``."""

    tau: int
    anchor: np.ndarray | None = None
    anchor_grad: np.ndarray | None = None

    def __post_init__(self):
        if int(self.tau) < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        self.tau = int(self.tau)


@dataclass
class RcadState:
    """Running table ``g``: last evaluated partial derivative per coordinate."""

    table: np.ndarray | None = None

    def initialize(self, p, x0):
        self.table = np.array(p.grad(x0), dtype=np.float64)
        return p.d


def _rows(x, r):
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    idx = np.broadcast_to(np.asarray(r, dtype=np.int64), (X.shape[0],))
    return X, idx


def _shape_like(F, x):
    return F[0] if np.ndim(x) == 1 else F


def full_flux(p, x):
    """``F = ∇f(x)``, charged ``d``."""
    return Flux(p.grad(x), p.d)


def rcd_flux(p, x, r, dist=None):
    """``F = ∂_r f(x)/φ_r · e_r`` (``d·∂_r f(x)·e_r`` when uniform), charged 1."""
    X, idx = _rows(x, r)
    if idx.size and (idx.min() < 0 or idx.max() >= p.d):
        raise IndexError(f"coordinate index out of range 0..{p.d - 1}")
    scale = p.d if dist is None else 1.0 / dist.probs[idx]
    F = np.zeros_like(X)
    F[np.arange(X.shape[0]), idx] = scale * p.partial(X, idx)
    return Flux(_shape_like(F, x), 1)


def svrg_flux(state, p, x, m, r):
    """SVRG flux; refreshes the anchor to the current iterate when ``m % tau == 0``.

    Between refreshes ``F = ĝ + d·(∂_r f(x) - ĝ_r)·e_r``, charged 1.  With
    ``tau == 1`` every step is a refresh and the sampler is plain
    full-gradient LMC.
    """
    if m < 0:
        raise ValueError(f"step index must be >= 0, got {m}")
    if m % state.tau == 0:
        state.anchor = np.array(x, dtype=np.float64)
        state.anchor_grad = p.grad(state.anchor)
        return Flux(state.anchor_grad.copy(), p.d)
    if state.anchor_grad is None:
        raise ValueError("SVRG state has no anchor; the first step must be an epoch boundary")
    if np.shape(state.anchor_grad) != np.shape(x):
        raise ValueError(
            f"SVRG state shape {np.shape(state.anchor_grad)} does not match x {np.shape(x)}"
        )
    X, idx = _rows(x, r)
    G = np.atleast_2d(state.anchor_grad)
    rows = np.arange(X.shape[0])
    F = G.copy()
    F[rows, idx] += p.d * (p.partial(X, idx) - G[rows, idx])
    return Flux(_shape_like(F, x), 1)


def rcad_flux(state, p, x, r):
    """RCAD (SAGA) flux ``F = g + d·(∂_r f(x) - g_r)·e_r``; then ``g_r ← ∂_r f(x)``."""
    if state.table is None:
        raise ValueError("RCAD table is not initialized; call RcadState.initialize(p, x0)")
    if np.shape(state.table) != np.shape(x):
        raise ValueError(f"RCAD table shape {np.shape(state.table)} does not match x {np.shape(x)}")
    X, idx = _rows(x, r)
    g = np.atleast_2d(state.table)
    rows = np.arange(X.shape[0])
    new = p.partial(X, idx)
    F = g.copy()
    F[rows, idx] += p.d * (new - g[rows, idx])
    g[rows, idx] = new
    return Flux(_shape_like(F, x), 1)


def rcd_variance_exact(p, x, dist=None):
    """``E_r|F - ∇f(x)|² = Σ_i (1/φ_i - 1)(∂_i f(x))²`` for the RCD flux."""
    g = np.asarray(p.grad(x))
    w = (p.d - 1.0) if dist is None else (1.0 / dist.probs - 1.0)
    return np.sum(w * g * g, axis=-1)


def flux_error(p, x, flux):
    """``E = ∇f(x) - F``.  Costs a full gradient; for tests and diagnostics only."""
    return p.grad(x) - flux.F


# -- per-algorithm drivers used by the samplers ------------------------------


class _FullEstimator:
    uses_coordinate = False

    def start(self, p, X):
        return 0

    def flux(self, p, X, m, r):
        return full_flux(p, X)


class _RcdEstimator:
    uses_coordinate = True

    def __init__(self, dist=None):
        self.dist = dist

    def start(self, p, X):
        return 0

    def flux(self, p, X, m, r):
        # same values as rcd_flux, kept sparse for the samplers
        scale = p.d if self.dist is None else 1.0 / self.dist.probs[r]
        return Flux.single(r, scale * p.partial(X, r), p.d)


class _SvrgEstimator:
    uses_coordinate = True

    def __init__(self, tau):
        self.state = SvrgState(tau)

    def start(self, p, X):
        return 0

    def flux(self, p, X, m, r):
        return svrg_flux(self.state, p, X, m, r)


class _RcadEstimator:
    uses_coordinate = True

    def __init__(self):
        self.state = RcadState()

    def start(self, p, X):
        return self.state.initialize(p, X)

    def flux(self, p, X, m, r):
        return rcad_flux(self.state, p, X, r)


def make_estimator(family, tau=None, dist=None):
    """Fresh, single-owner estimator for ``family`` in ``full, rcd, svrg, rcad``."""
    if family == "full":
        return _FullEstimator()
    if family == "rcd":
        return _RcdEstimator(dist)
    if family == "svrg":
        if tau is None:
            raise ValueError("SVRG needs an epoch length tau")
        return _SvrgEstimator(tau)
    if family == "rcad":
        return _RcadEstimator()
    raise ValueError(f"unknown estimator family {family!r}")
