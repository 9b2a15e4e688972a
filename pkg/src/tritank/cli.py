"""Command-line front end.

Subcommands:
  linearize   print the continuous and sampled model at an operating point
  design      print a tracking gain for requested closed-loop eigenvalues
  simulate    run a scenario config, write the CSV (and optionally figures)
  metrics     recompute summary metrics from a run CSV

Exit codes: 0 on success, 1 for configuration errors, 2 for numerical
failures (diagnostics on stderr).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import scenario as scenario_mod
from .errors import NumericalError
from .linmodel import discretize, jacobian_at
from .metrics import DEFAULT_BURN_IN, metrics_from_columns
from .plant import PlantParams
from .tracking import augment, place_poles


def _print_matrix(name: str, M: np.ndarray) -> None:
    print(f"{name} =")
    for row in np.atleast_2d(M):
        print("  [" + "  ".join(f"{v: .6e}" for v in row) + "]")


def _cmd_linearize(args) -> int:
    params = PlantParams()
    y0 = np.asarray(args.y0, dtype=float)
    cm = jacobian_at(params, y0)
    dm = discretize(cm, args.ts)
    print(f"operating levels y0 = {list(y0)}, t_s = {args.ts}")
    _print_matrix("F", cm.F)
    _print_matrix("B", cm.B)
    _print_matrix("A_d", dm.A)
    _print_matrix("B_d", dm.B)
    return 0


def _cmd_design(args) -> int:
    params = PlantParams()
    dm = discretize(jacobian_at(params, np.asarray(args.y0, dtype=float)), args.ts)
    am = augment(dm)
    gain = place_poles(am, np.asarray(args.lambdas, dtype=float))
    _print_matrix("K", gain.K)
    achieved = np.linalg.eigvals(am.A - am.B @ gain.K)
    print("closed-loop eigenvalues:")
    for v in sorted(achieved, key=lambda c: c.real):
        print(f"  {v.real:.10f}{v.imag:+.10f}j")
    return 0


def _cmd_simulate(args) -> int:
    cfg = scenario_mod.load_scenario(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.duration is not None:
        cfg = dataclasses.replace(cfg, duration=args.duration)
    records, metrics = scenario_mod.run_scenario(cfg)
    scenario_mod.write_csv(records, args.output)
    print(f"wrote {len(records)} records to {args.output}")
    if args.figures is not None:
        from .figures import render_figures

        out_dir = args.figures or os.path.dirname(os.path.abspath(args.output))
        stem = os.path.splitext(os.path.basename(args.output))[0]
        for path in render_figures(records, out_dir, stem):
            print(f"wrote {path}")
    print(json.dumps(metrics.to_dict(), indent=2))
    return 0


def _cmd_metrics(args) -> int:
    cols = scenario_mod.read_csv(args.csv)
    report = metrics_from_columns(cols, burn_in=args.burn_in)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tritank",
        description="Three-tank benchmark workbench: simulation, control design, estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lin = sub.add_parser("linearize", help="print model matrices at an operating point")
    p_lin.add_argument("--y0", type=float, nargs=3, default=list(scenario_mod.DEFAULT_Y0),
                       metavar=("H1", "H2", "H3"))
    p_lin.add_argument("--ts", type=float, default=1.0, help="sampling period [s]")
    p_lin.set_defaults(func=_cmd_linearize)

    p_des = sub.add_parser("design", help="pole-place the tracking gain")
    p_des.add_argument("--lambdas", type=float, nargs=5,
                       default=list(scenario_mod.DEFAULT_LAMBDAS),
                       help="five desired closed-loop eigenvalues")
    p_des.add_argument("--y0", type=float, nargs=3, default=list(scenario_mod.DEFAULT_Y0))
    p_des.add_argument("--ts", type=float, default=1.0)
    p_des.set_defaults(func=_cmd_design)

    p_sim = sub.add_parser("simulate", help="run a scenario config")
    p_sim.add_argument("--config", required=True, help="scenario JSON file")
    p_sim.add_argument("--output", required=True, help="output CSV path")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--duration", type=float, default=None, help="override the duration [s]")
    p_sim.add_argument("--figures", nargs="?", const="", default=None, metavar="DIR",
                       help="also render figures (to DIR, default: next to the CSV)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_met = sub.add_parser("metrics", help="recompute metrics from a run CSV")
    p_met.add_argument("--csv", required=True)
    p_met.add_argument("--burn-in", type=float, default=DEFAULT_BURN_IN,
                       help="estimation-error burn-in [s]")
    p_met.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
