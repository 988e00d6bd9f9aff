#!/usr/bin/env python3
"""Discretization residuals of the fold map under grid refinement.

Prints the Gauss, Codazzi and gauge residuals per resolution and the ratio
between successive resolutions (about 4 for a second-order scheme).
"""
import argparse

import numpy as np

from graphflow.flow import flow_rhs
from graphflow.geometry import codazzi_residual, gauge_residual, gauss_residual, graph_geometry
from graphflow.grid import build_grid
from graphflow.manifolds import hyperbolic, sphere
from graphflow.maps import dilation_map


def residuals(res, target, c):
    f = dilation_map(build_grid(sphere(), res, "atlas"), target, c)
    rhs = flow_rhs(f)
    gd = graph_geometry(f, rhs.jets)
    return (gauss_residual(f, gd)[0], codazzi_residual(f, gd)[0], gauge_residual(f, gd, rhs.velocity)[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", choices=("sphere", "hyperbolic"), default="sphere")
    ap.add_argument("--c", type=float, default=0.5)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()
    target = sphere() if args.target == "sphere" else hyperbolic()
    rows = np.array([residuals(r, target, args.c) for r in args.resolutions])
    print(f"{'res':>5} {'gauss':>11} {'codazzi':>11} {'gauge':>11}")
    for r, row in zip(args.resolutions, rows):
        print(f"{r:5d} " + " ".join(f"{v:11.3e}" for v in row))
    for a, b, ra in zip(args.resolutions, args.resolutions[1:], rows[:-1] / rows[1:]):
        print(f"{a}->{b} ratios " + " ".join(f"{v:6.2f}" for v in ra))


if __name__ == "__main__":
    main()
