"""Command line: ``run``, ``sweep``, ``bounds`` and ``check``.

Worker threads default to the CPU count; set ``RCDLMC_WORKERS`` to override.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..theory import BoundParams
from .checks import SUITES, run_suite
from .config import PRESETS, ConfigError, dump_config, parse_config, preset_spec
from .csvio import emit_csv, write_saturation_tsv
from .experiment import bounds_table, run_experiment


def _progress(row):
    err = "-" if row["weak_error"] is None else f"{row['weak_error']:.3e}"
    print(f"{row['algorithm']:>7} h={row['h']:<10g} status={row['status']:<8} weak_error={err} "
          f"cost={row['cost_partials']} wall={row['wall_ms']} ms", file=sys.stderr)


def _execute(spec, out, append):
    rows = run_experiment(spec, progress=_progress)
    if out:
        emit_csv(rows, out, append=append)
        sat = [(r["algorithm"], r["h"], r["saturation_error"]) for r in rows if r["saturation_error"] is not None]
        tsv = Path(out).with_suffix(".saturation.tsv")
        write_saturation_tsv(sat, tsv)
        print(f"wrote {out} and {tsv}", file=sys.stderr)
    else:
        emit_csv(rows, "/dev/stdout")
    return 0


def cmd_run(args):
    spec = parse_config(Path(args.config).read_text())
    if args.echo:
        print(dump_config(spec), end="")
        return 0
    return _execute(spec, args.out or spec.out, args.append)


def cmd_sweep(args):
    spec = preset_spec(args.preset, args.scale)
    overrides = {k: getattr(args, k) for k in ("N", "M", "seed") if getattr(args, k) is not None}
    if args.algorithm:
        overrides["algorithms"] = tuple(args.algorithm)
    spec = replace(spec, **overrides)
    return _execute(spec, args.out or spec.out, args.append)


def cmd_bounds(args):
    params = BoundParams(mu=args.mu, lip_grad=args.L, lip_hess=args.H, d=args.d, tau=args.tau, W0=args.W0)
    print(f"mu={args.mu} L={args.L} H={args.H} d={args.d} tau={args.tau} W0={args.W0} eps={args.eps}")
    print(bounds_table(params, eps=args.eps))
    return 0


def cmd_check(args):
    names = [args.suite] if args.suite else list(SUITES)
    failed = 0
    for name in names:
        print(f"== suite {name}")
        failed += sum(not r.passed for r in run_suite(name))
    return 1 if failed else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="rcdlmc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (default: config 'out', else stdout)")
    p.add_argument("--append", action="store_true", help="append to an existing CSV")
    p.add_argument("--echo", action="store_true", help="print the validated config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a preset h-sweep")
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--algorithm", nargs="+")
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--append", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="step-size caps, W2 bounds and cost scalings")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--H", type=float)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--tau", type=int)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--W0", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check", help="run acceptance suites")
    p.add_argument("--suite", choices=sorted(SUITES))
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
