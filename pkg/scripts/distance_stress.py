"""Stress the shooting distance solver against the closed forms of the model surfaces.

    python3 scripts/distance_stress.py --pairs 500 --seed 1

Prints the worst absolute and relative errors per model and writes the
raw samples to a CSV when --csv is given.
"""

import argparse
import csv
import math
import time

import numpy as np

from warpcheck.fiber import FiberSpace
from warpcheck.geometry import WarpedProduct, height_distance
from warpcheck.warp import BaseSpace, WarpFunction

PI = math.pi


def closed_form(name, r0, r1, L):
    if name == "sin":
        c = math.cos(r0) * math.cos(r1) + math.sin(r0) * math.sin(r1) * math.cos(min(L, PI))
        return math.acos(max(-1.0, min(1.0, c)))
    if name == "id":
        return math.sqrt(max(0.0, r0 * r0 + r1 * r1 - 2 * r0 * r1 * math.cos(L))) if L < PI else r0 + r1
    if name == "const":
        return math.hypot(r1 - r0, L)
    if name == "sinh":
        c = math.cosh(r0) * math.cosh(r1) - math.sinh(r0) * math.sinh(r1) * math.cos(min(L, PI))
        return math.acosh(max(1.0, c))
    if name == "cosh":
        return math.acosh(max(1.0, math.cosh(r0) * math.cosh(r1) * math.cosh(L) - math.sinh(r0) * math.sinh(r1)))
    y0, y1 = math.exp(-r0), math.exp(-r1)
    return math.acosh(1 + (L * L + (y1 - y0) ** 2) / (2 * y0 * y1))


MODELS = {
    "sin": (1.0, BaseSpace.interval(0, PI), (0.0, PI)),
    "id": (0.0, BaseSpace.halfline(), (0.0, 4.0)),
    "const": (0.0, BaseSpace.line(), (-4.0, 4.0)),
    "sinh": (-1.0, BaseSpace.halfline(), (0.0, 3.0)),
    "cosh": (-1.0, BaseSpace.line(), (-2.5, 2.5)),
    "exp": (-1.0, BaseSpace.line(), (-2.5, 2.5)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-L", type=float, default=4.0)
    ap.add_argument("--csv", help="write every sample here")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'model':6s} {'pairs':>6s} {'max abs':>10s} {'max rel':>10s} {'sec':>6s}")
    for name, (K, B, (lo, hi)) in MODELS.items():
        W = WarpedProduct(B, WarpFunction.catalog(name, K), 2.0, FiberSpace.circle(2 * PI))
        t0 = time.perf_counter()
        worst_abs = worst_rel = 0.0
        for _ in range(args.pairs):
            r0, r1 = rng.uniform(lo, hi, 2)
            L = rng.uniform(0.0, args.max_L)
            d = height_distance(W, r0, r1, L)
            ref = closed_form(name, r0, r1, L)
            err = abs(d - ref)
            worst_abs = max(worst_abs, err)
            worst_rel = max(worst_rel, err / max(ref, 1e-12))
            rows.append((name, r0, r1, L, d, ref, err))
        dt = time.perf_counter() - t0
        print(f"{name:6s} {args.pairs:6d} {worst_abs:10.2e} {worst_rel:10.2e} {dt:6.1f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "r0", "r1", "L", "distance", "closed_form", "abs_error"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
