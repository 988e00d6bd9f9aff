#!/usr/bin/env python3
"""Compare the 2D engine with the 1D reduced solver on the fold map.

The 2D run is sampled every --stride steps; the reduced solver is asked for
exactly those times.
"""
import argparse

from graphflow.flow import Controls, run
from graphflow.grid import build_grid
from graphflow.manifolds import hyperbolic, sphere
from graphflow.maps import dilation_map
from graphflow.oracle import ReducedControls, fold_profile, run_reduced


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", choices=("sphere", "hyperbolic"), default="sphere")
    ap.add_argument("--resolution", type=int, default=64)
    ap.add_argument("--t-max", type=float, default=1.0)
    ap.add_argument("--stride", type=int, default=100)
    ap.add_argument("--nodes", type=int, default=201)
    args = ap.parse_args()
    M = sphere()
    N = sphere() if args.target == "sphere" else hyperbolic()
    f = dilation_map(build_grid(M, args.resolution, "atlas"), N, 0.5)
    full = run(f, Controls(t_max=args.t_max, monitor_stride=args.stride, gauge_check=False))
    times = [s.t for s in full.report.samples]
    red = run_reduced(fold_profile(M, N, 0.5, args.nodes), ReducedControls(sample_times=times))
    print(f"{'t':>9} {'lam_2d':>10} {'lam_1d':>10} {'H2_2d':>10} {'H2_1d':>10}")
    for a, b in zip(full.report.samples, red.samples):
        print(f"{a.t:9.4f} {a.lambda_max:10.6f} {b.lambda_max:10.6f} {a.max_H2:10.6f} {b.max_H2:10.6f}")
    print(f"h^2 = {f.grid.h ** 2:.3e}")


if __name__ == "__main__":
    main()
