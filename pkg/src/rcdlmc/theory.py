"""Step-size caps, W2 upper bounds, the RCD-U lower bound and cost scalings.

Every formula carries its explicit constants so a transcription error shows
up when a bound is compared with an exactly computable chain law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BoundParams",
    "NotApplicable",
    "stepsize_cap",
    "w2_bound",
    "w2_remainder",
    "counterexample_lower_bound",
    "iteration_cost_estimate",
    "COUNTEREXAMPLE_MIN_D",
]

ALGS = ("OLMC", "ULMC", "RCD_O", "RCD_U", "SVRG_O", "SVRG_U", "RCAD_O", "RCAD_U")
NEEDS_H = ("RCD_O", "SVRG_O", "RCAD_O")
NEEDS_TAU = ("SVRG_O", "SVRG_U")
COUNTEREXAMPLE_MIN_D = 1872


class NotApplicable(ValueError):
    """The requested bound does not apply at these parameters."""


@dataclass(frozen=True)
class BoundParams:
    """Constants entering the bounds.

    ``lip_hess`` (H) is only needed by the overdamped RCD/SVRG/RCAD results
    and by the OLMC remainder; ``tau`` only by SVRG.
    """

    mu: float
    lip_grad: float
    d: int
    lip_hess: float | None = None
    tau: int | None = None
    W0: float = 0.0
    gamma: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lip_grad < self.mu:
            raise ValueError(f"L={self.lip_grad} < mu={self.mu}; kappa must be >= 1")
        if int(self.d) < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.lip_hess is not None and self.lip_hess < 0:
            raise ValueError("H must be nonnegative")
        if self.tau is not None and int(self.tau) < 1:
            raise ValueError("tau must be >= 1")
        if self.W0 < 0:
            raise ValueError("W0 must be nonnegative")

    @property
    def kappa(self):
        return self.lip_grad / self.mu


def _check_alg(alg):
    if alg not in ALGS:
        raise ValueError(f"unknown algorithm {alg!r}; expected one of {ALGS}")


def _need(params, alg):
    if alg in NEEDS_H and params.lip_hess is None:
        raise ValueError(f"{alg} needs the Hessian Lipschitz constant H")
    if alg in NEEDS_TAU and params.tau is None:
        raise ValueError(f"{alg} needs the epoch length tau")


def stepsize_cap(alg, params):
    """Largest step size for which the convergence bound of ``alg`` holds."""
    _check_alg(alg)
    _need(params, alg)
    mu, L, d, k = params.mu, params.lip_grad, params.d, params.kappa
    H, tau = params.lip_hess, params.tau
    if alg == "OLMC":
        return 2.0 / (mu + L)
    if alg == "ULMC":
        return 1.0 / (8.0 * k * k * mu)
    if alg == "RCD_O":
        return min(1.0 / (9.0 * k * k * mu * d), 2.0 / (H * H / (k * mu * mu) + k * k * mu / d))
    if alg == "RCD_U":
        return 1.0 / (880.0 * d * k)
    if alg == "SVRG_O":
        return min(1.0 / (400.0 * d * k * k * mu), 1.0 / (10.0 * tau * max(mu, 1.0)))
    if alg == "RCAD_O":
        return 1.0 / (3.0 * (1.0 + 9.0 * d) * k * k * mu)
    if alg == "SVRG_U":
        return min(1.0 / (1648.0 * k * d), 1.0 / (40.0 * tau))
    return 1.0 / (1648.0 * k * d)  # RCAD_U


def _remainder(alg, h, params):
    mu, d, k = params.mu, params.d, params.kappa
    H, tau = params.lip_hess, params.tau
    if alg == "OLMC":
        H = 0.0 if H is None else H
        return H * h * d / (2.0 * mu) + 3.0 * k**1.5 * math.sqrt(mu) * h * math.sqrt(d)
    if alg == "ULMC":
        return h * math.sqrt(k * d)
    if alg == "RCD_O":
        return 6.0 * d * math.sqrt(k * h)
    if alg == "RCD_U":
        return 100.0 * math.sqrt(k / mu) * d * math.sqrt(h)
    if alg == "SVRG_O":
        c1 = 30.0 * k**1.5 * mu
        c2 = 50.0 * k * math.sqrt(mu) + 5.0 * math.sqrt(k**3 * mu / d + 2.0 * H * H / (mu * mu))
        return h**1.5 * tau * d * c1 + h * math.sqrt(tau) * d * c2
    if alg == "RCAD_O":
        c1 = 77.0 * k * k * mu
        c2 = H * H / (mu * mu) + k**3 * mu / d
        return 2.0 * h * math.sqrt(d**3 * c1 + d * d * c2)
    if alg == "SVRG_U":
        return h * math.sqrt(d) * 200.0 * math.sqrt(k / mu) + h**1.5 * tau * d * 240.0 / math.sqrt(mu)
    # RCAD_U
    return h * math.sqrt(d) * 200.0 * math.sqrt(k / mu) + h**1.5 * d * d * 200.0 / math.sqrt(mu)


def _contraction(alg, m, h, params):
    mu, k = params.mu, params.kappa
    rate, pre = {
        "OLMC": (mu, 1.0),
        "ULMC": (0.375 / k, math.sqrt(2.0)),
        "RCD_O": (mu / 4.0, 1.0),
        "RCD_U": (1.0 / (8.0 * k), 4.0),
        "SVRG_O": (mu / 32.0, 1.0),
        "RCAD_O": (mu / 4.0, math.sqrt(2.0)),
        "SVRG_U": (1.0 / (32.0 * k), 4.0),
        "RCAD_U": (1.0 / (8.0 * k), 4.0 * math.sqrt(2.0)),
    }[alg]
    return pre * math.exp(-rate * m * h)


def w2_remainder(alg, h, params):
    """The ``m``-independent part of :func:`w2_bound`."""
    _check_alg(alg)
    _need(params, alg)
    return _remainder(alg, h, params)


def w2_bound(alg, m, h, params):
    """Upper bound on ``W2(law of iterate m, target)``.

    Raises
    ------
    NotApplicable
        If ``h`` exceeds :func:`stepsize_cap`.
    """
    cap = stepsize_cap(alg, params)
    if not 0 < h <= cap:
        raise NotApplicable(f"bound not applicable: h={h} outside (0, {cap}] for {alg}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return _contraction(alg, m, h, params) * params.W0 + _remainder(alg, h, params)


def counterexample_lower_bound(d, h, m, enforce=True):
    """Lower bound on W2 for RCD-U-LMC on the shifted standard Gaussian.

    ``exp(-2mh)·sqrt(d)/1024 + d^{3/2}·h/2304``, valid for ``d > 1872`` and
    ``h < 1/(1440² d)``.  With ``enforce=False`` the expression is evaluated
    outside that range (arithmetic only, no longer a bound).
    """
    if enforce:
        if not d > COUNTEREXAMPLE_MIN_D:
            raise NotApplicable(f"bound not applicable: needs d > {COUNTEREXAMPLE_MIN_D}, got {d}")
        if not 0 < h < 1.0 / (1440.0**2 * d):
            raise NotApplicable(f"bound not applicable: needs h < 1/(1440² d) = {1.0 / (1440.0**2 * d):.4g}")
    if m == math.inf:
        return d**1.5 * h / 2304.0
    return math.exp(-2.0 * m * h) * math.sqrt(d) / 1024.0 + d**1.5 * h / 2304.0


def iteration_cost_estimate(alg, d, eps):
    """``(iterations, cost)`` scaling for accuracy ``eps``; constants and logs dropped."""
    _check_alg(alg)
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if alg == "OLMC":
        return d / eps, d * d / eps
    if alg == "ULMC":
        return math.sqrt(d) / eps, d**1.5 / eps
    if alg in ("RCD_O", "RCD_U"):
        n = d * d / eps**2
    elif alg in ("SVRG_O", "RCAD_O"):
        n = d**1.5 / eps
    else:
        n = max(d ** (4.0 / 3.0) / eps ** (2.0 / 3.0), math.sqrt(d) / eps)
    return n, n
