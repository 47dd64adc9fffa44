#!/usr/bin/env python3
"""Relaxation of 2-D Fokker-Planck to its stationary profile.

Runs fp2d_barenblatt at several grid spacings and reports the terminal
error against the stationary profile for each metric; errors should
shrink as the grid refines.  Pass --full to include the fine h = 0.02
level (several minutes).
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from blobflow import convergence_sweep, load_config


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, nargs="+", default=None)
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out", default="runs/fp_steady_2d")
    args = ap.parse_args()

    h_list = args.h or ([0.08, 0.04, 0.02] if args.full else [0.12, 0.08, 0.04])
    cfg = load_config(pathlib.Path(__file__).resolve().parent.parent
                      / "configs" / "fp2d_barenblatt.yaml")
    report = convergence_sweep(cfg, h_list, out_dir=args.out)
    for metric, errs in sorted(report.errors.items()):
        txt = "  ".join(f"h={h:g}: {e:.5f}" for h, e in zip(report.h_list, errs))
        print(f"{metric:>4}  {txt}  (slope {report.slopes[metric]:+.2f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
