"""Sweep driver: targets, reference moments, ensemble runs and result rows."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from pathlib import Path

import numpy as np

from ..kernels import ALGORITHMS, DeadlineExceeded, DivergenceError, RunConfig, run_ensemble
from ..metrics import saturation_error, test_function, weak_error
from ..potentials import (
    NoClosedForm,
    analytic_moment,
    make_double_gaussian,
    make_glm_posterior,
    make_isotropic_gaussian,
    synth_glm_data,
)
from ..theory import ALGS, BoundParams, iteration_cost_estimate, stepsize_cap, w2_bound, w2_remainder

__all__ = ["build_target", "reference_moment", "relaxation_rate", "run_experiment", "bounds_table"]

log = logging.getLogger(__name__)


def build_target(target):
    """Potential from a ``{kind, d, params}`` record."""
    kind, d, params = target["kind"], int(target["d"]), target.get("params") or {}
    if kind == "gaussian":
        return make_isotropic_gaussian(d, params.get("center", 0.0))
    if kind == "mixture":
        return make_double_gaussian(d, params.get("offset", 2.0))
    if kind == "glm":
        data = synth_glm_data(
            d,
            int(params.get("count", 100)),
            x_true=params.get("x_true", 1.0),
            noise_model=params.get("noise_model", "gaussian"),
            seed=int(params.get("seed", 0)),
        )
        return make_glm_posterior(data)
    raise ValueError(f"unknown target kind {kind!r}")


def _cache_dir():
    return Path(os.environ.get("RCDLMC_CACHE", Path.home() / ".cache" / "rcdlmc"))


def _glm_mode(p, iters=100):
    x = np.zeros(p.d)
    A = p.data.features
    for _ in range(iters):
        r = p._b - A @ x
        g = x - A.T @ p._dg(r)
        curv = 1.0 - 0.5 * np.cos(r) if p._cos else np.ones_like(r)
        H = np.eye(p.d) + (A.T * curv) @ A
        step = np.linalg.solve(H, g)
        x = x - step
        if np.max(np.abs(step)) < 1e-13:
            break
    return x, H


def importance_moment(p, phi, draws=400_000, inflate=1.05, seed=0, chunk=20_000):
    """Self-normalised importance estimate of ``E_p[φ]`` for a GLM posterior.

    The proposal is the Laplace approximation ``N(mode, inflate·H⁻¹)``.

    Returns
    -------
    (estimate, stderr, ess)
    """
    mode, H = _glm_mode(p)
    cov = inflate * np.linalg.inv(H)
    chol = np.linalg.cholesky(cov)
    prec = np.linalg.inv(cov)
    rng = np.random.default_rng(seed)
    logw, vals = [], []
    for start in range(0, draws, chunk):
        z = rng.standard_normal((min(chunk, draws - start), p.d))
        X = mode + z @ chol.T
        dx = X - mode
        logq = -0.5 * np.einsum("nd,de,ne->n", dx, prec, dx)
        logw.append(-p._value(X) - logq)
        vals.append(phi(X))
    logw = np.concatenate(logw)
    vals = np.concatenate(vals)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    est = float(np.sum(w * vals))
    ess = float(1.0 / np.sum(w * w))
    stderr = float(math.sqrt(np.sum(w * w * (vals - est) ** 2)))
    return est, stderr, ess


def reference_moment(spec, p):
    """``E_p[φ]`` from a closed form, or a cached importance-sampling estimate."""
    t = spec.target
    try:
        if t["kind"] == "gaussian":
            return analytic_moment("gaussian", spec.phi, center=t["params"].get("center", 0.0), d=p.d)
        if t["kind"] == "mixture":
            return analytic_moment("mixture", spec.phi, offset=p.offset, d=p.d)
        return analytic_moment("glm", spec.phi, potential=p)
    except NoClosedForm:
        pass
    params = t["params"]
    key = f"glm-{params['noise_model']}-d{p.d}-n{params['count']}-s{params['seed']}-x{params['x_true']}-{spec.phi}"
    path = _cache_dir() / f"{key}.json"
    if path.exists():
        return json.loads(path.read_text())["moment"]
    log.info("computing reference moment %s", key)
    est, stderr, ess = importance_moment(p, test_function(spec.phi))
    if ess < 1000:
        raise RuntimeError(f"reference estimate unreliable: effective sample size {ess:.0f}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"moment": est, "stderr": stderr, "ess": ess}))
    return est


def relaxation_rate(mu, gamma=None):
    """Slowest decay rate of the continuous dynamics on a ``mu``-convex quadratic.

    Overdamped: ``mu``.  Underdamped with damping 2 and force scale ``gamma``:
    the slow root of ``s^2 + 2s + gamma·mu``, i.e. ``1 - sqrt(1 - gamma·mu)``
    when ``gamma·mu < 1`` and 1 otherwise.
    """
    if gamma is None:
        return mu
    g = gamma * mu
    return 1.0 if g >= 1.0 else -math.expm1(0.5 * math.log1p(-g))


def run_experiment(spec, workers=None, deadline=None, progress=None):
    """Run every ``(algorithm, h)`` pair of ``spec`` and return one row per pair.

    Rows are dicts keyed by the CSV columns plus ``saturation_error`` (the
    plateau of the recorded weak error, ``None`` when the run is too short
    to reach ``m·h = 10/mu``).  Divergent runs get ``status = diverged``
    and runs cut by ``deadline`` (a ``time.monotonic()`` value) get
    ``status = timeout``; neither carries an error value.
    """
    p = build_target(spec.target)
    exact = reference_moment(spec, p)
    phi = test_function(spec.phi)
    mu = p.mu or 1.0
    rows = []
    for alg in spec.algorithms:
        under = ALGORITHMS[alg][1]
        svrg = ALGORITHMS[alg][0] == "svrg"
        rate = relaxation_rate(mu, spec.gamma if under else None)
        for h in spec.h_list:
            M = spec.steps_for(h, rate)
            stride = spec.stride_for(M) if M else 0
            cfg = RunConfig(
                alg, h=h, M=M, N=spec.N,
                gamma=spec.gamma if under else None,
                tau=spec.tau if svrg else None,
                seed=spec.seed, init=spec.init, selection=spec.selection,
            )
            row = {
                "preset": spec.preset, "algorithm": alg, "target": spec.target["kind"], "d": p.d,
                "h": h, "tau": cfg.tau, "gamma": cfg.resolved_gamma(p) if under else None,
                "M": M, "N": spec.N, "seed": spec.seed, "phi": spec.phi,
                "weak_error": None, "mc_stderr": None, "cost_partials": None,
                "status": "ok", "saturation_error": None,
            }
            t0 = time.perf_counter()
            try:
                if deadline is not None and time.monotonic() > deadline:
                    raise DeadlineExceeded("deadline reached before start")
                res = run_ensemble(cfg, p, workers=workers, phi=phi, stride=stride, deadline=deadline)
            except DivergenceError as exc:
                row["status"] = "diverged"
                log.warning("%s h=%g: %s", alg, h, exc)
            except DeadlineExceeded:
                row["status"] = "timeout"
            else:
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        err, se = weak_error(res.x, phi, exact)
                    if not math.isfinite(se):
                        raise OverflowError
                except OverflowError:
                    row["status"] = "diverged"
                else:
                    row.update(weak_error=err, mc_stderr=se, cost_partials=res.cost)
                    try:
                        row["saturation_error"] = saturation_error(res.trace, exact, h, rate)
                    except ValueError:
                        pass
            row["wall_ms"] = int(round(1000 * (time.perf_counter() - t0)))
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def bounds_table(params, eps=0.1, m_grid=(0, 10, 100, 1000, 10000)):
    """Text table of step-size caps, bound values at ``h = cap`` and cost scalings."""
    head = ["algorithm", "h_cap", *[f"W2(m={m})" for m in m_grid], "remainder", "iterations", "cost"]
    lines = []
    for alg in ALGS:
        n_it, cost = iteration_cost_estimate(alg, params.d, eps)
        try:
            cap = stepsize_cap(alg, params)
            vals = [f"{w2_bound(alg, m, cap, params):.4g}" for m in m_grid]
            rem = f"{w2_remainder(alg, cap, params):.4g}"
            cap_s = f"{cap:.4g}"
        except ValueError as exc:
            cap_s, vals, rem = "n/a", ["n/a"] * len(m_grid), str(exc).split(" needs ")[-1]
        lines.append([alg, cap_s, *vals, rem, f"{n_it:.3g}", f"{cost:.3g}"])
    widths = [max(len(r[i]) for r in [head, *lines]) for i in range(len(head))]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    out = [fmt.format(*head), fmt.format(*["-" * w for w in widths])]
    out += [fmt.format(*r) for r in lines]
    return "\n".join(out)


def params_from_target(p, tau=None, W0=0.0):
    if p.mu is None or p.lip_grad is None:
        raise ValueError("target has no mu/L; pass explicit surrogate constants")
    return BoundParams(mu=p.mu, lip_grad=p.lip_grad, d=p.d, lip_hess=p.lip_hess, tau=tau, W0=W0)
