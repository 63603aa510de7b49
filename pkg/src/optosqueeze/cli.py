"""Command-line front end.

Exit codes: 0 ok, 1 selftest failure, 2 config error, 3 convergence failure,
4 unstable parameters, 5 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__, squeezing, sweep
from .config import ConfigError, load
from .errors import NoConvergence, OracleMismatch, ParameterError, Unstable
from .linear import build_reduced, is_stable
from .lyapunov import solve_steady
from .meanfield import effective_params, solve_steady_state, steady_row
from .model import PhysicalParams

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_UNSTABLE = 4
EXIT_ORACLE = 5


def _emit(record: dict, fmt: str, out_dir: str | None, stem: str):
    if fmt == "json":
        text = json.dumps(record, sort_keys=True, default=float) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(record.keys())
        w.writerow(sweep.format_cell(v) for v in record.values())
        text = buf.getvalue()
    sys.stdout.write(text)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{stem}.{fmt}")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_steady(args) -> int:
    cfg = load(args.config)
    p = cfg.params()
    if not isinstance(p, PhysicalParams):
        raise ConfigError("steady needs a [physical] section")
    s = solve_steady_state(p)
    _emit(steady_row(s, p), args.format, args.out, "steady")
    return EXIT_OK


def cmd_squeeze(args) -> int:
    cfg = load(args.config)
    p = cfg.params()
    e = effective_params(solve_steady_state(p), p) if isinstance(p, PhysicalParams) else p
    m = build_reduced(e)
    st = is_stable(m)
    if not st.stable:
        raise Unstable(st.margin)
    cov = solve_steady(m)
    rep = squeezing.report(cov.V)
    record = {
        "S_theta0_db": rep.S_theta0_db,
        "S_opt_db": rep.S_opt_db,
        "theta_opt": rep.theta_opt,
        "beats_3db": rep.beats_3db,
        "degenerate": rep.degenerate,
        "margin": st.margin,
        "var_Xb": rep.var_Xb,
        "var_Yb": rep.var_Yb,
        "cov_XbYb": rep.cov_XbYb,
        "lyap_residual": cov.residual,
    }
    _emit(record, args.format, args.out, "squeeze")
    if args.out:
        with open(os.path.join(args.out, "squeeze_angles.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(squeezing.angle_scan_csv(cov.V))
    return EXIT_OK


def _finish_sweep(result, args, plot: bool):
    out = args.out or "."
    paths = result.write(out)
    if plot:
        from .plotting import render

        paths.append(render(result, os.path.join(out, f"{result.spec.name}.png")))
    n_stable = result.provenance["stable_rows"]
    print(f"{result.spec.name}: {len(result.rows)} rows, {n_stable} stable, oracle {result.provenance['oracle']}")
    for p in paths:
        print(f"  wrote {p}")


def cmd_sweep(args) -> int:
    cfg = load(args.config)
    spec = sweep.spec_from_config(cfg, seed=args.seed)
    result = sweep.run(spec, workers=args.threads, config_text=cfg.text)
    _finish_sweep(result, args, plot=args.plot)
    return EXIT_OK


def cmd_figure(args) -> int:
    spec = sweep.preset(args.name, n_points=args.points)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    result = sweep.run(spec, workers=args.threads)
    if args.name == "fig3":
        result.provenance["unstable_phi_bands"] = stability_bands(result)
    _finish_sweep(result, args, plot=not args.no_plot)
    return EXIT_OK


def stability_bands(result, lambdas=(0.0, 1.0, 5.0)) -> dict:
    """Unstable phi intervals per series at the grid Lambda nearest each of ``lambdas``."""
    phi_axis, lam_axis = result.spec.axes
    grid_l = lam_axis.values()
    out = {}
    for label in result.series_labels():
        stable = result.column("stable", label).reshape(phi_axis.n_points, lam_axis.n_points)
        per = {}
        for lam in lambdas:
            j = int(np.argmin(np.abs(grid_l - lam)))
            bands = sweep.unstable_bands(phi_axis.values(), stable[:, j] == 1)
            per[f"Lambda={grid_l[j]:.6g}"] = {
                "radians": [list(b) for b in bands],
                "units_of_pi": [[b[0] / math.pi, b[1] / math.pi] for b in bands],
            }
        out[label] = per
    return out


def cmd_selftest(args) -> int:
    from .selftest import run_all

    checks = run_all(draws=args.draws, seed=args.seed or 0)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name} ({c.seconds:.1f}s): {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed} passed, {failed} failed")
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = argparse.ArgumentParser(prog="optosqueeze", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", parents=[common], help="mean-field steady state")
    p.set_defaults(func=cmd_steady, needs_config=True)
    p = sub.add_parser("squeeze", parents=[common], help="steady-state squeezing at one point")
    p.set_defaults(func=cmd_squeeze, needs_config=True)
    p = sub.add_parser("sweep", parents=[common], help="run the [sweep] section of a config")
    p.add_argument("--plot", action="store_true", help="also render a PNG")
    p.set_defaults(func=cmd_sweep, needs_config=True)
    p = sub.add_parser("figure", parents=[common], help="run a figure preset")
    p.add_argument("name", choices=sorted(sweep.PRESETS))
    p.add_argument("--points", type=int, default=None, help="override points per axis")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_figure, needs_config=False)
    p = sub.add_parser("selftest", parents=[common], help="oracle and invariant checks")
    p.add_argument("--draws", type=int, default=10, help="random models in the oracle triangle")
    p.set_defaults(func=cmd_selftest, needs_config=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_config and not args.config:
        parser.error(f"{args.command} needs --config")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except Unstable as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_UNSTABLE
    except OracleMismatch as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
