#!/usr/bin/env python3
"""Grid-refinement study for the 1-D diffusion presets.

Runs the fundamental-solution scenarios for m = 1, 2, 3 over a list of
grid spacings and prints the fitted error slopes for every metric.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from blobflow import convergence_sweep, load_config

CONFIGS = {
    1: "fundamental_m1_1d.yaml",
    2: "fundamental_m2_1d.yaml",
    3: "fundamental_m3_1d.yaml",
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    ap.add_argument("--t", type=float, default=0.05, help="evaluation time")
    ap.add_argument("--m", type=int, nargs="+", default=[1, 2, 3], choices=[1, 2, 3])
    ap.add_argument("--out", default="runs/convergence_1d")
    args = ap.parse_args()

    cfg_dir = pathlib.Path(__file__).resolve().parent.parent / "configs"
    for m in args.m:
        cfg = load_config(cfg_dir / CONFIGS[m])
        report = convergence_sweep(cfg, args.h, t_eval=args.t,
                                   out_dir=f"{args.out}/m{m}")
        for metric in sorted(report.slopes):
            print(f"m={m}  {metric:>4}  slope {report.slopes[metric]:+.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
