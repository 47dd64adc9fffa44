"""Command-line entry point.

Verbs: run <config>, sweep <config> --h ..., ks2d <config> --mass ...
Exit codes: 0 success, 2 config/validation error, 3 numerical failure.
The BLOBFLOW_WORKERS environment variable sets the worker count for
sweep and criticality runs (default 1).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .dynamics import DynamicsError
from .runner import convergence_sweep, ks2d_criticality, run_scenario
from .transport import TransportError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blobflow",
        description="Deterministic-particle simulation of diffusive gradient flows.")
    sub = p.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run one scenario config")
    run.add_argument("config", help="path to a scenario YAML file")
    run.add_argument("--out", default=None, help="output directory (default: config's output)")

    sweep = sub.add_parser("sweep", help="convergence sweep over grid spacings")
    sweep.add_argument("config")
    sweep.add_argument("--h", dest="h_list", type=float, nargs="+", required=True,
                       metavar="H", help="grid spacings (at least 3)")
    sweep.add_argument("--t", dest="t_eval", type=float, default=None,
                       help="evaluation time (default: config t_final)")
    sweep.add_argument("--out", default=None)

    ks = sub.add_parser("ks2d", help="Keller-Segel criticality slope table")
    ks.add_argument("config")
    ks.add_argument("--mass", dest="masses", type=float, nargs="+", required=True,
                    metavar="M", help="total masses to run")
    ks.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "run":
            res = run_scenario(cfg, out_dir=args.out)
            marker = res.trajectory
            note = " (blow-up truncation)" if marker.blew_up else ""
            print(f"run {cfg.name}: {marker.final.n} particles, "
                  f"t={marker.times[-1]:g}{note} -> {res.out_dir}")
        elif args.verb == "sweep":
            rep = convergence_sweep(cfg, args.h_list, t_eval=args.t_eval, out_dir=args.out)
            for metric, slope in rep.slopes.items():
                print(f"sweep {cfg.name}: {metric} slope {slope:.4f}")
            print(f"-> {rep.out_dir}")
        else:
            rows = ks2d_criticality(args.masses, cfg, out_dir=args.out)
            for r in rows:
                print(f"ks2d {cfg.name}: mass {r['mass']:g} slope {r['fitted_slope']:.4f} "
                      f"(theory {r['reference_slope']:.4f}, R^2 {r['r_squared']:.4f})")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DynamicsError, TransportError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
