#!/usr/bin/env python3
"""Map the 0.5-fidelity transition over (duration, distance) and fit speed.

For each trap frequency in the configured grid, sweeps the shortcut over
the (t_f, d) plane, locates where the final fidelity first crosses 0.5,
refines each crossing, and fits d = v_b * t_f to extract the limiting
transport velocity. Writes map.csv, transitions.csv, and speed_limit.csv.
"""

import argparse
import sys
from pathlib import Path

from magnon_transport import RunConfig, load_config, run_dt_map


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path("configs/map_dt.json"))
    ap.add_argument("--out", type=Path, default=None, help="default: config output_dir")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None, help="unused here; kept for symmetry")
    args = ap.parse_args()

    config = load_config(args.config) if args.config.exists() else RunConfig()
    out_dir = args.out if args.out is not None else Path(config.output_dir)
    summary = run_dt_map(config, out_dir, workers=args.workers)
    for line in summary["lines"]:
        print(line)
    for omega0, v in sorted(summary["v_b"].items()):
        print(f"omega0={omega0:g}: v_b = {v:.4f}")
    print(f"outputs in {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
