"""Acceptance checks, grouped into the ``unit``, ``moments`` and ``slopes`` suites.

Each check returns a :class:`CheckResult`; nothing here is loosened to make
a check pass.  A check that exceeds its runtime limit fails.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..estimators import SelectionDistribution, SvrgState, RcadState, rcad_flux, rcd_flux, svrg_flux
from ..kernels import InitSpec, RunConfig, run_chain, run_ensemble, underdamped_coeffs, underdamped_step
from ..metrics import fit_loglog_slope, saturation_error, test_function, w2_gaussian_diag
from ..potentials import make_glm_posterior, make_isotropic_gaussian, synth_glm_data
from ..rng import ChainStreams
from ..theory import BoundParams, NotApplicable, counterexample_lower_bound, stepsize_cap, w2_bound
from .config import preset_spec
from .experiment import run_experiment

__all__ = ["CheckResult", "SUITES", "run_suite"] + [f"check_{k}" for k in range(1, 10)]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float | None = None

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        lim = f" (limit {self.limit:g} s)" if self.limit else ""
        return f"[{mark}] criterion {self.number}: {self.name}: {self.detail} [{self.seconds:.2f} s{lim}]"


def _timed(number, name, limit):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            ok, detail = fn(*args, **kwargs)
            dt = time.perf_counter() - t0
            if limit is not None and dt > limit:
                ok = False
                detail += f"; runtime {dt:.1f} s over the {limit:g} s limit"
            return CheckResult(number, name, bool(ok), detail, dt, limit)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def _targets(d=10, seed=0):
    glm = make_glm_posterior(synth_glm_data(d, 20, x_true=1.0, seed=seed))
    return {"gaussian": make_isotropic_gaussian(d), "glm": glm}


def _all_coords(p, x):
    """``x`` repeated once per coordinate, with ``r = 0..d-1``."""
    return np.repeat(x[None, :], p.d, axis=0), np.arange(p.d)


def _weighted_sum(probs, F):
    return np.array([math.fsum(probs * F[:, j]) for j in range(F.shape[1])])


# -- unit --------------------------------------------------------------------


@_timed(1, "estimator unbiasedness (exhaustive)", 1.0)
def check_1(states=50, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in _targets(seed=seed).values():
        d = p.d
        nonuni = SelectionDistribution(rng.dirichlet(np.ones(d)))
        for _ in range(states):
            x = rng.standard_normal(d)
            g = p.grad(x)
            X, r = _all_coords(p, x)
            uni = np.full(d, 1.0 / d)
            cases = [
                (uni, rcd_flux(p, X, r).F),
                (nonuni.probs, rcd_flux(p, X, r, nonuni).F),
            ]
            sv = SvrgState(tau=d + 5)
            svrg_flux(sv, p, np.repeat(rng.standard_normal(d)[None, :], d, axis=0), 0, r)
            cases.append((uni, svrg_flux(sv, p, X, 1, r).F))
            table = RcadState(np.repeat(p.grad(rng.standard_normal(d))[None, :], d, axis=0))
            cases.append((uni, rcad_flux(table, p, X, r).F))
            for probs, F in cases:
                worst = max(worst, float(np.max(np.abs(_weighted_sum(probs, F) - g))))
    return worst <= 1e-12, f"max componentwise error {worst:.3e} (tolerance 1e-12)"


@_timed(2, "exact RCD variance identity", 1.0)
def check_2(states=50, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in _targets(seed=seed).values():
        d = p.d
        for _ in range(states):
            x = rng.standard_normal(d)
            g = p.grad(x)
            X, r = _all_coords(p, x)
            for dist in (None, SelectionDistribution(rng.dirichlet(np.ones(d)))):
                probs = np.full(d, 1.0 / d) if dist is None else dist.probs
                F = rcd_flux(p, X, r, dist).F
                second = math.fsum(probs * np.sum((F - g) ** 2, axis=1))
                if dist is None:
                    exact = (d - 1) * math.fsum(g * g)
                else:
                    exact = math.fsum((1.0 / probs - 1.0) * g * g)
                worst = max(worst, abs(second - exact) / exact)
    return worst <= 1e-10, f"max relative deviation {worst:.3e} (tolerance 1e-10)"


@_timed(6, "exact cost accounting", None)
def check_6():
    d, M = 10, 1000
    p = make_isotropic_gaussian(d)
    want = {
        "RCD_O": M, "RCD_U": M, "RCAD_O": d + M, "RCAD_U": d + M,
        "SVRG_O": M + (M // 10) * (d - 1), "SVRG_U": M + (M // 10) * (d - 1),
        "OLMC": d * M, "ULMC": d * M,
    }
    bad = []
    for alg, expect in want.items():
        before = p.evals.value
        res = run_chain(RunConfig(alg, h=0.01, M=M, tau=10, seed=3), p)
        counted = p.evals.value - before
        if res.cost != expect or counted != expect:
            bad.append(f"{alg}: cost {res.cost}, counter {counted}, expected {expect}")
    detail = "; ".join(bad) if bad else ", ".join(f"{a}={c}" for a, c in want.items())
    return not bad, detail


@_timed(9, "determinism across worker counts", None)
def check_9():
    spec = _small_sweep()
    a = run_experiment(spec, workers=1)
    b = run_experiment(spec, workers=4)
    cols = ("weak_error", "cost_partials")
    same = all(ra[c] == rb[c] for ra, rb in zip(a, b) for c in cols) and len(a) == len(b)
    vals = ", ".join(f"{r['algorithm']}:{r['weak_error']!r}" for r in a)
    return same, ("bit-identical" if same else "columns differ") + f" over {len(a)} rows ({vals})"


def _small_sweep():
    from dataclasses import replace

    spec = preset_spec("example1")
    return replace(
        spec,
        algorithms=("RCD_O", "SVRG_U", "RCAD_O"),
        target={**spec.target, "d": 10},
        tau=10,
        gamma=1.0,
        N=3000,
        h_list=(0.05,),
        M=100,
    )


# -- moments -------------------------------------------------------------------


@_timed(3, "underdamped kernel moments", 30.0)
def check_3(draws=1_000_000, seed=4):
    x0, v0, F0 = 0.3, -0.2, 0.7
    worst = 0.0
    for h in (0.05, 0.1, 0.5):
        for gamma in (0.5, 1.0):
            c = underdamped_coeffs(h, gamma)
            s = ChainStreams(seed, np.arange(draws))
            z1, z2 = s.normals(0, 1, 0)[:, 0], s.normals(0, 1, 4)[:, 0]
            xs, vs = underdamped_step(np.full(draws, x0), np.full(draws, v0), np.full(draws, F0), c, (z1, z2))
            mx = x0 + c.a_xv * v0 + c.a_xF * F0
            mv = c.a_vv * v0 + c.a_vF * F0
            dx, dv = xs - mx, vs - mv
            n = draws
            stats = [
                (xs.mean() - mx, math.sqrt(c.s_xx / n)),
                (vs.mean() - mv, math.sqrt(c.s_vv / n)),
                (np.mean(dx * dx) - c.s_xx, c.s_xx * math.sqrt(2.0 / n)),
                (np.mean(dv * dv) - c.s_vv, c.s_vv * math.sqrt(2.0 / n)),
                (np.mean(dx * dv) - c.s_xv, math.sqrt((c.s_xx * c.s_vv + c.s_xv**2) / n)),
            ]
            worst = max(worst, max(abs(e) / se for e, se in stats))
    dets = min(underdamped_coeffs(2.0**-k, g).det for k in range(21) for g in (0.1, 1.0, 10.0))
    h = 1e-3
    c = underdamped_coeffs(h, 1.0)
    ratios = (c.s_xx / h**3 / (4 / 3), c.s_xv / h**2 / 2.0, c.s_vv / h / 4.0)
    ratio_err = max(abs(r - 1.0) for r in ratios)
    ok = worst <= 4.0 and dets >= 0.0 and ratio_err <= 0.01
    return ok, (
        f"worst |deviation|/stderr {worst:.2f} (<= 4); min det {dets:.3e} (>= 0); "
        f"small-h ratio error {ratio_err:.2%} (<= 1%)"
    )


@_timed(4, "AR(1) stationary variance", 30.0)
def check_4(N=100_000, d=10, h=0.1, seed=5):
    p = make_isotropic_gaussian(d)
    M = int(round(40 / h))
    res = run_ensemble(RunConfig("OLMC", h=h, M=M, N=N, seed=seed, init=InitSpec(0.5)), p)
    want = 1.0 / (1.0 - h / 2.0)
    var = res.x.var(axis=0, ddof=1)
    se = want * math.sqrt(2.0 / (N - 1))
    z = float(np.max(np.abs(var - want)) / se)
    return z <= 4.0, f"variances {var.min():.5f}..{var.max():.5f} vs {want:.5f}, worst {z:.2f} stderr (<= 4)"


def exact_olmc_w2(d, h, m_max, x_mean=0.5):
    """Exact W2 between OLMC iterates on N(0, I) and the target, ``m = 0..m_max``.

    Starting from ``N(x_mean·1, I)`` the iterate law is
    ``N(x_mean (1-h)^m 1, var_m I)`` with ``var_{m+1} = (1-h)² var_m + 2h``.
    """
    m = np.arange(m_max + 1)
    a = (1.0 - h) ** (2 * m)
    stat = 1.0 / (1.0 - h / 2.0)
    mean = x_mean * (1.0 - h) ** m
    var = stat + (1.0 - stat) * a
    return np.sqrt(d * (mean**2 + (np.sqrt(var) - 1.0) ** 2))


@_timed(7, "OLMC bound dominance", 5.0)
def check_7(m_max=10_000):
    worst = -math.inf
    for d in (2, 10, 50):
        params = BoundParams(mu=1.0, lip_grad=1.0, lip_hess=0.0, d=d, W0=0.5 * math.sqrt(d))
        h = stepsize_cap("OLMC", params) / 2
        exact = exact_olmc_w2(d, h, m_max)
        bound = np.array([w2_bound("OLMC", m, h, params) for m in range(m_max + 1)])
        worst = max(worst, float(np.max(exact - bound)))
    return worst <= 0.0, f"max(exact W2 - bound) = {worst:.4f} (must be <= 0)"


# -- slopes --------------------------------------------------------------------

SLOPE_RULES = {
    "RCD_O": (0.6, 1.4),
    "SVRG_O": (1.5, 2.5),
    "RCAD_O": (1.5, 2.5),
    "RCD_U": (0.6, 1.4),
    "SVRG_U": (1.8, math.inf),
    "RCAD_U": (1.8, math.inf),
}


@_timed(5, "saturation-error slopes on the example1 desk preset", 600.0)
def check_5(workers=None, budget=600.0):
    spec = preset_spec("example1", "desk")
    deadline = time.monotonic() + budget
    rows = run_experiment(spec, workers=workers, deadline=deadline)
    parts, ok = [], True
    for alg, (lo, hi) in SLOPE_RULES.items():
        pts = [(r["h"], r["saturation_error"]) for r in rows if r["algorithm"] == alg and r["status"] == "ok"
               and r["saturation_error"]]
        status = {r["status"] for r in rows if r["algorithm"] == alg}
        if len(pts) < 3:
            ok = False
            parts.append(f"{alg}: only {len(pts)} usable points (status {sorted(status)})")
            continue
        slope = fit_loglog_slope(pts)
        good = lo <= slope <= hi
        ok &= good
        parts.append(f"{alg}: slope {slope:.2f} in [{lo}, {hi}] {'ok' if good else 'NO'} ({len(pts)} pts)")
    return ok, "; ".join(parts)


COUNTEREXAMPLE_DIMS = (20, 40, 80)


def counterexample_saturation(d, N, h=1e-3, horizon=20.0, seed=0, workers=None):
    """Saturation weak error of RCD-U-LMC on the shifted-Gaussian instance, ``φ = |x|²/d``."""
    p = make_isotropic_gaussian(d)
    M = int(round(horizon / h))
    cfg = RunConfig("RCD_U", h=h, M=M, N=N, gamma=1.0, seed=seed, init=InitSpec(0.125, 1.0, 0.0, 1.0))
    res = run_ensemble(cfg, p, workers=workers, phi=test_function("mean_square"), stride=max(1, M // 200))
    return saturation_error(res.trace, 1.0, h)


@_timed(8, "counter-example bound arithmetic and d-monotonicity", 300.0)
def check_8(chain_coords=100_000, seed=0, workers=None):
    d, h = 2000, 1e-9
    arith = [
        (counterexample_lower_bound(d, 1e-11, math.inf), d**1.5 * 1e-11 / 2304),
        (counterexample_lower_bound(d, 1e-11, 0), math.sqrt(d) / 1024 + d**1.5 * 1e-11 / 2304),
        (counterexample_lower_bound(d, h, 10**6, enforce=False),
         math.exp(-0.002) * math.sqrt(2000) / 1024 + 2000**1.5 * 1e-9 / 2304),
    ]
    arith_ok = all(math.isclose(a, b, rel_tol=1e-14) for a, b in arith)
    try:
        counterexample_lower_bound(d, h, 10**6)
        arith_ok = False
    except NotApplicable:
        pass
    errs = [counterexample_saturation(k, chain_coords // k, seed=seed, workers=workers) for k in COUNTEREXAMPLE_DIMS]
    mono = all(a < b for a, b in zip(errs, errs[1:]))
    detail = "arithmetic " + ("ok" if arith_ok else "MISMATCH") + "; saturation errors " + ", ".join(
        f"d={k}: {e:.5f}" for k, e in zip(COUNTEREXAMPLE_DIMS, errs)
    ) + (" increasing" if mono else " NOT increasing")
    return arith_ok and mono, detail


SUITES = {
    "unit": (check_1, check_2, check_6, check_9),
    "moments": (check_3, check_4, check_7),
    "slopes": (check_5, check_8),
}


def run_suite(name, report=print):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    results = []
    for check in SUITES[name]:
        res = check()
        results.append(res)
        report(res.line())
    return results
