#!/usr/bin/env python3
"""Run the fold map S^2 -> S^2 (or S^2 -> H^2) at resolution 64 and print the verdicts.

    python scripts/theorem_run.py --target hyperbolic -o runs/h2
"""
import argparse
import sys

from graphflow.cli import orchestrate
from graphflow.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--target", choices=("sphere", "hyperbolic"), default="sphere")
    ap.add_argument("--resolution", type=int, default=64)
    ap.add_argument("--c", type=float, default=0.5, help="fold amplitude")
    ap.add_argument("-o", "--output-dir", default="runs/theorem")
    args = ap.parse_args()
    curv = 1.0 if args.target == "sphere" else -1.0
    cfg = RunConfig(target_kind=args.target, target_curvature=curv, resolution=args.resolution,
                    map_parameter=args.c, output_dir=args.output_dir)
    code = orchestrate(cfg)
    with open(f"{args.output_dir}/verdicts.csv", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return code


if __name__ == "__main__":
    import logging
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    sys.exit(main())
