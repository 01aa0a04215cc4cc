"""Overdamped and underdamped Langevin transitions, single chains and ensembles.

The underdamped kernel samples the exact Gaussian transition of

    dX = V dt,   dV = -2 V dt - γ F dt + sqrt(4γ) dB

over one step of length ``h`` with the flux ``F`` frozen at the start of the
step.  Per coordinate the update is

    x' = x + a_xv v + a_xF F + ℓ11 z1
    v' = a_vv v + a_vF F + ℓ21 z1 + ℓ22 z2

with ``ℓ`` the lower Cholesky factor of ``[[σ_xx, σ_xv], [σ_xv, σ_vv]]``.

Ensembles are processed in fixed blocks of :data:`BLOCK` chains.  All
randomness comes from :class:`~rcdlmc.rng.ChainStreams`, so the result does
not depend on the worker count or the execution order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .estimators import SelectionDistribution, make_estimator
from .rng import TAG_INIT_V, TAG_INIT_X, TAG_NOISE, ChainStreams

__all__ = [
    "ALGORITHMS",
    "BLOCK",
    "DivergenceError",
    "DeadlineExceeded",
    "KernelCoeffs",
    "InitSpec",
    "RunConfig",
    "ChainResult",
    "EnsembleResult",
    "overdamped_step",
    "underdamped_coeffs",
    "underdamped_step",
    "run_chain",
    "run_ensemble",
    "default_workers",
]

# algorithm id -> (estimator family, underdamped?)
ALGORITHMS = {
    "OLMC": ("full", False),
    "ULMC": ("full", True),
    "RCD_O": ("rcd", False),
    "RCD_U": ("rcd", True),
    "SVRG_O": ("svrg", False),
    "SVRG_U": ("svrg", True),
    "RCAD_O": ("rcad", False),
    "RCAD_U": ("rcad", True),
}

BLOCK = 1024
TAG_NOISE_V = 4
DET_TOL = 1e-15
TAYLOR_BELOW = 1e-3


class DeadlineExceeded(RuntimeError):
    """The run did not finish before its wall-clock deadline."""


class DivergenceError(RuntimeError):
    """A chain produced a non-finite state."""

    def __init__(self, step, chain):
        super().__init__(f"chain {chain} diverged (non-finite state) at step {step}")
        self.step = step
        self.chain = chain


# -- overdamped ---------------------------------------------------------------


def _as_rows(a, shape, copy=False):
    a = np.broadcast_to(np.asarray(a, dtype=np.float64), shape)
    a = np.array(a, order="C") if copy else np.ascontiguousarray(a)
    return a.reshape(-1, shape[-1])


@nb.njit(cache=True, nogil=True)
def _od_update(x, F, z, h, s):
    # in place; returns the first row with a non-finite entry, or -1
    bad = -1
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            y = x[i, j] - h * F[i, j] + s * z[i, j]
            x[i, j] = y
            if bad < 0 and not np.isfinite(y):
                bad = i
    return bad


def overdamped_step(x, F, h, noise):
    """Euler-Maruyama: ``x' = x - h F + sqrt(2h) ξ``."""
    F = getattr(F, "F", F)
    shape = np.shape(x)
    X = _as_rows(x, shape, copy=True)
    _od_update(X, _as_rows(F, shape), _as_rows(noise, shape), float(h), math.sqrt(2.0 * h))
    return X.reshape(shape)


# -- underdamped --------------------------------------------------------------


@dataclass(frozen=True)
class KernelCoeffs:
    h: float
    gamma: float
    a_xv: float
    a_xF: float
    a_vv: float
    a_vF: float
    s_xx: float
    s_xv: float
    s_vv: float

    @property
    def det(self):
        return self.s_xx * self.s_vv - self.s_xv * self.s_xv

    def cholesky(self):
        """Lower factor ``(ℓ11, ℓ21, ℓ22)`` of the per-coordinate covariance."""
        det = self.det
        if det < -DET_TOL:
            raise ArithmeticError(f"negative covariance determinant {det!r} at h={self.h}")
        if self.s_xx <= 0.0:
            return 0.0, 0.0, math.sqrt(max(self.s_vv, 0.0))
        l11 = math.sqrt(self.s_xx)
        return l11, self.s_xv / l11, math.sqrt(max(det, 0.0) / self.s_xx)


def _series(h, coeffs):
    return sum(c * h**k for k, c in coeffs)


# Taylor coefficients (k, c) of h - 3/4 - e^{-4h}/4 + e^{-2h} and h - (1 - e^{-2h})/2
_SXX_SERIES = [(k, (-1) ** k * (2.0**k - 2.0 ** (2 * k - 2)) / math.factorial(k)) for k in range(3, 8)]
_AXF_SERIES = [(k, (-1) ** k * 2.0 ** (k - 1) / math.factorial(k)) for k in range(2, 8)]


def underdamped_coeffs(h, gamma):
    """Mean and covariance coefficients of the one-step underdamped transition."""
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    em2 = math.expm1(-2.0 * h)  # e^{-2h} - 1
    em4 = math.expm1(-4.0 * h)
    if h < TAYLOR_BELOW:
        sxx = _series(h, _SXX_SERIES)
        lag = _series(h, _AXF_SERIES)
    else:
        # h - 3/4 - e^{-4h}/4 + e^{-2h} rewritten in expm1 terms to limit cancellation
        sxx = h + em2 - 0.25 * em4
        lag = h + 0.5 * em2
    return KernelCoeffs(
        h=float(h),
        gamma=float(gamma),
        a_xv=-0.5 * em2,
        a_xF=-0.5 * gamma * lag,
        a_vv=math.exp(-2.0 * h),
        a_vF=0.5 * gamma * em2,
        s_xx=gamma * sxx,
        s_xv=0.5 * gamma * em2 * em2,
        s_vv=-gamma * em4,
    )


@nb.njit(cache=True, nogil=True)
def _od_update_single(x, idx, vals, z, h, s):
    bad = -1
    for i in range(x.shape[0]):
        r = idx[i]
        for j in range(x.shape[1]):
            f = vals[i] if j == r else 0.0
            y = x[i, j] - h * f + s * z[i, j]
            x[i, j] = y
            if bad < 0 and not np.isfinite(y):
                bad = i
    return bad


@nb.njit(cache=True, nogil=True)
def _ud_update_single(x, v, idx, vals, z1, z2, a_xv, a_xF, a_vv, a_vF, l11, l21, l22):
    bad = -1
    for i in range(x.shape[0]):
        r = idx[i]
        for j in range(x.shape[1]):
            xo = x[i, j]
            vo = v[i, j]
            f = vals[i] if j == r else 0.0
            xn = xo + a_xv * vo + a_xF * f + l11 * z1[i, j]
            vn = a_vv * vo + a_vF * f + l21 * z1[i, j] + l22 * z2[i, j]
            x[i, j] = xn
            v[i, j] = vn
            if bad < 0 and not (np.isfinite(xn) and np.isfinite(vn)):
                bad = i
    return bad


@nb.njit(cache=True, nogil=True)
def _ud_update(x, v, F, z1, z2, a_xv, a_xF, a_vv, a_vF, l11, l21, l22):
    # in place; returns the first row with a non-finite entry, or -1
    bad = -1
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xo = x[i, j]
            vo = v[i, j]
            f = F[i, j]
            xn = xo + a_xv * vo + a_xF * f + l11 * z1[i, j]
            vn = a_vv * vo + a_vF * f + l21 * z1[i, j] + l22 * z2[i, j]
            x[i, j] = xn
            v[i, j] = vn
            if bad < 0 and not (np.isfinite(xn) and np.isfinite(vn)):
                bad = i
    return bad


def underdamped_step(x, v, F, coeffs, noise):
    """One exact Gaussian step; ``noise`` is ``(z1, z2)`` or an array ``[..., 2d]``."""
    F = getattr(F, "F", F)
    shape = np.shape(x)
    d = shape[-1]
    if isinstance(noise, tuple):
        z1, z2 = noise
    else:
        noise = np.asarray(noise, dtype=np.float64)
        z1, z2 = noise[..., :d], noise[..., d:]
    X = _as_rows(x, shape, copy=True)
    V = _as_rows(v, shape, copy=True)
    _ud_update(X, V, _as_rows(F, shape), _as_rows(z1, shape), _as_rows(z2, shape), *_step_scalars(coeffs))
    return X.reshape(shape), V.reshape(shape)


def _step_scalars(c):
    l11, l21, l22 = c.cholesky()
    return c.a_xv, c.a_xF, c.a_vv, c.a_vF, l11, l21, l22


# -- run configuration ---------------------------------------------------------


@dataclass(frozen=True)
class InitSpec:
    """``x⁰ ~ N(x_mean·1, x_std² I)`` and ``v⁰ ~ N(v_mean·1, v_std² I)``."""

    x_mean: float = 0.0
    x_std: float = 1.0
    v_mean: float = 0.0
    v_std: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    h: float
    M: int
    N: int = 1
    gamma: float | None = None
    tau: int | None = None
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    selection: tuple | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {list(ALGORITHMS)}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.M < 0:
            raise ValueError(f"M must be >= 0, got {self.M}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.family == "svrg" and (self.tau is None or self.tau < 1):
            raise ValueError("SVRG needs tau >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def family(self):
        return ALGORITHMS[self.algorithm][0]

    @property
    def underdamped(self):
        return ALGORITHMS[self.algorithm][1]

    def resolved_gamma(self, p):
        if self.gamma is not None:
            return float(self.gamma)
        if p.lip_grad is not None:
            return 1.0 / p.lip_grad
        raise ValueError("gamma not set and the target has no gradient Lipschitz constant")


@dataclass
class ChainResult:
    x: np.ndarray
    v: np.ndarray | None
    m: int
    cost: int
    trace: list = field(default_factory=list)


@dataclass
class EnsembleResult:
    """Final states of ``N`` chains, total cost and the recorded ensemble trace.

    ``trace`` holds ``(m, mean φ, mean φ²)`` at every recorded step, with
    means taken over all chains.
    """

    x: np.ndarray
    v: np.ndarray | None
    cost: int
    trace: list = field(default_factory=list)

    @property
    def N(self):
        return self.x.shape[0]


def default_workers():
    env = os.environ.get("RCDLMC_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _initial_state(cfg, streams, d):
    init = cfg.init
    x = init.x_mean + init.x_std * streams.normals(0, d, TAG_INIT_X)
    v = None
    if cfg.underdamped:
        v = init.v_mean + init.v_std * streams.normals(0, d, TAG_INIT_V)
    return x, v


def _run_block(cfg, p, streams, phi=None, stride=0, deadline=None):
    """Advance the chains in ``streams`` for ``cfg.M`` steps; arrays are ``(n, d)``."""
    d = p.d
    dist = SelectionDistribution(cfg.selection) if cfg.selection is not None else None
    if dist is not None and dist.d != d:
        raise ValueError(f"selection has {dist.d} entries, target has d={d}")
    cdf = None if dist is None else dist.cdf
    est = make_estimator(cfg.family, tau=cfg.tau, dist=dist)
    x, v = _initial_state(cfg, streams, d)
    scal = _step_scalars(underdamped_coeffs(cfg.h, cfg.resolved_gamma(p))) if cfg.underdamped else None
    sq2h = math.sqrt(2.0 * cfg.h)
    cost = est.start(p, x)
    sums = []

    def record(m):
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(phi(x), dtype=np.float64)
            sq = vals * vals
        bad = np.flatnonzero(~np.isfinite(sq))
        if bad.size:
            raise DivergenceError(m, int(streams.chains[bad[0]]))
        try:
            sums.append((m, math.fsum(vals), math.fsum(sq)))
        except OverflowError:
            raise DivergenceError(m, int(streams.chains[0])) from None

    if phi is not None and stride:
        record(0)
    for m in range(cfg.M):
        # the coordinate draw always consumes its counter, used or not
        r = streams.coordinates(m, d, cdf) if est.uses_coordinate else None
        flux = est.flux(p, x, m, r)
        cost += flux.charged
        # a zero flux entry contributes exactly 0.0, so sparse and dense paths agree bit-for-bit
        if scal is None:
            z = streams.normals(m, d, TAG_NOISE)
            if flux.sparse:
                bad = _od_update_single(x, flux.coords, flux.values, z, cfg.h, sq2h)
            else:
                bad = _od_update(x, np.ascontiguousarray(flux.F), z, cfg.h, sq2h)
        else:
            z1 = streams.normals(m, d, TAG_NOISE)
            z2 = streams.normals(m, d, TAG_NOISE_V)
            if flux.sparse:
                bad = _ud_update_single(x, v, flux.coords, flux.values, z1, z2, *scal)
            else:
                bad = _ud_update(x, v, np.ascontiguousarray(flux.F), z1, z2, *scal)
        if bad >= 0:
            raise DivergenceError(m + 1, int(streams.chains[bad]))
        if phi is not None and stride and (m + 1) % stride == 0:
            record(m + 1)
        if deadline is not None and m % 64 == 63 and time.monotonic() > deadline:
            raise DeadlineExceeded(f"deadline reached after {m + 1} of {cfg.M} steps")
    return x, v, cost, sums


def run_chain(cfg, p, chain_rng=None, phi=None, stride=0):
    """Run one chain.

    Parameters
    ----------
    cfg : RunConfig
    p : Potential
    chain_rng : ChainStreams, optional
        Streams for exactly one chain; defaults to chain 0 of ``cfg.seed``.
    phi : callable, optional
        Test function ``(n, d) -> (n,)`` recorded every ``stride`` steps.

    Returns
    -------
    ChainResult
        Final state, step count, cost in partial-derivative units and the
        recorded ``(m, φ(x^m))`` pairs.
    """
    if chain_rng is None:
        chain_rng = ChainStreams(cfg.seed, [0])
    if len(chain_rng) != 1:
        raise ValueError("run_chain needs streams for exactly one chain")
    x, v, cost, sums = _run_block(cfg, p, chain_rng, phi, stride)
    trace = [(m, s) for m, s, _ in sums]
    return ChainResult(x[0], None if v is None else v[0], cfg.M, cost, trace)


def run_ensemble(cfg, p, master_seed=None, workers=None, phi=None, stride=0, deadline=None):
    """Run ``cfg.N`` independent chains; chain ``k`` uses the streams of ``(seed, k)``.

    Blocks of :data:`BLOCK` chains run on a thread pool of ``workers``
    threads (default: ``RCDLMC_WORKERS`` or the CPU count).  The block
    partition is fixed, so results are bit-identical for any worker count.
    On divergence the :class:`DivergenceError` of the lowest-numbered block
    is raised.  ``deadline`` is a ``time.monotonic()`` value after which
    :class:`DeadlineExceeded` is raised.
    """
    seed = cfg.seed if master_seed is None else master_seed
    workers = default_workers() if workers is None else max(1, int(workers))
    starts = list(range(0, cfg.N, BLOCK))

    def job(start):
        streams = ChainStreams(seed, np.arange(start, min(start + BLOCK, cfg.N)))
        return _run_block(cfg, p, streams, phi, stride, deadline)

    if workers == 1 or len(starts) == 1:
        results = [job(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job, s) for s in starts]
            results = [f.result() for f in futures]

    x = np.concatenate([r[0] for r in results])
    v = None if results[0][1] is None else np.concatenate([r[1] for r in results])
    per_chain = results[0][2]
    trace = []
    for k, (m, _, _) in enumerate(results[0][3]):
        s1 = math.fsum(r[3][k][1] for r in results) / cfg.N
        s2 = math.fsum(r[3][k][2] for r in results) / cfg.N
        trace.append((m, s1, s2))
    return EnsembleResult(x, v, per_chain * cfg.N, trace)
