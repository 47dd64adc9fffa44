#!/usr/bin/env python3
"""Second-moment criticality study for 2-D aggregation-diffusion.

Reruns the ks2d_critical preset at several total masses and compares the
fitted second-moment slope with the virial prediction 2dM - 2 chi M^2.
"""

import argparse
import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from blobflow import ks2d_criticality, load_config


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mass", type=float, nargs="+",
                    default=[7 * math.pi, 8 * math.pi, 9 * math.pi])
    ap.add_argument("--config", default=None, help="override the preset config")
    ap.add_argument("--out", default="runs/ks_criticality_2d")
    args = ap.parse_args()

    cfg_path = args.config or (pathlib.Path(__file__).resolve().parent.parent
                               / "configs" / "ks2d_critical.yaml")
    cfg = load_config(cfg_path)
    rows = ks2d_criticality(args.mass, cfg, out_dir=args.out)
    for r in rows:
        print(f"mass {r['mass']:8.4f}  slope {r['fitted_slope']:+9.4f}"
              f"  theory {r['reference_slope']:+9.4f}  R^2 {r['r_squared']:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
