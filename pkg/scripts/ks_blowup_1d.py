#!/usr/bin/env python3
"""1-D supercritical aggregation: linear second-moment collapse.

Runs the ks1d_supercritical preset and fits the second moment over the
first half of its decay, where the virial identity predicts slope
2M - 2 chi M^2 (equal to -1 for mass 1 and chi = 1.5).
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from blobflow import ks_second_moment_slope, load_config, run_scenario
from blobflow.runner import _linear_fit


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="override the preset config")
    ap.add_argument("--out", default="runs/ks_blowup_1d")
    args = ap.parse_args()

    cfg_path = args.config or (pathlib.Path(__file__).resolve().parent.parent
                               / "configs" / "ks1d_supercritical.yaml")
    cfg = load_config(cfg_path)
    res = run_scenario(cfg, out_dir=args.out)

    ts = [row["t"] for row in res.trajectory.diagnostics]
    m2 = [row["second_moment"] for row in res.trajectory.diagnostics]
    half = [i for i, v in enumerate(m2) if v >= 0.5 * m2[0]]
    slope, _, r2 = _linear_fit([ts[i] for i in half], [m2[i] for i in half])
    theory = ks_second_moment_slope(cfg.mass, cfg.chi, cfg.dimension)
    print(f"fit over t <= {ts[half[-1]]:.3f} ({len(half)} points)")
    print(f"slope {slope:+.4f}  theory {theory:+.4f}  R^2 {r2:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
