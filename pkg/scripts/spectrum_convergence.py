"""Convergence of the weighted 1D spectra under grid refinement.

    python3 scripts/spectrum_convergence.py --k 5

Observed orders come from self-convergence of successive levels.  The
exact error column is filled in where the spectrum has a closed form.
"""

import argparse
import math

import numpy as np

from warpcheck.schrodinger import assemble, schrodinger_transform, spectrum
from warpcheck.warp import BaseSpace, WarpFunction

PI = math.pi

CASES = [
    ("sin N=2", "sin", 1.0, BaseSpace.interval(0, PI), 2.0, 0.0, lambda j: j * (j + 2.0)),
    ("sin N=3", "sin", 1.0, BaseSpace.interval(0, PI), 3.0, 0.0, lambda j: j * (j + 3.0)),
    ("flat N=2 lam=4", "const", 0.0, BaseSpace.interval(0, PI), 2.0, 4.0, lambda j: j * j + 4.0),
    ("cone N=2 lam=2", "id", 0.0, BaseSpace.halfline(), 2.0, 2.0, None),
    ("cosh N=2", "cosh", -1.0, BaseSpace.line(), 2.0, 0.0, None),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--n0", type=int, default=50)
    args = ap.parse_args()

    ns = [args.n0 * 2 ** i for i in range(args.levels)]
    for label, name, K, B, N, lam, exact in CASES:
        f = WarpFunction.catalog(name, K)
        ops = [assemble(B, f, N, lam, n) for n in ns]
        ev = np.array([spectrum(op, args.k).eigenvalues for op in ops])
        sv = np.array([schrodinger_transform(op).spectrum(args.k) for op in ops])
        print(f"\n{label}")
        print(f"{'n':>6s} {'lambda_last':>14s} {'order':>6s} {'|op - form|':>12s} {'exact err':>10s}")
        for i, n in enumerate(ns):
            order = ""
            if 1 <= i < len(ns) - 1:
                d0 = np.abs(ev[i] - ev[i - 1])[1:]
                d1 = np.abs(ev[i + 1] - ev[i])[1:]
                order = f"{np.median(np.log2(d0 / d1)):.2f}"
            gap = np.max(np.abs(ev[i] - sv[i]))
            err = ""
            if exact is not None:
                err = f"{np.max(np.abs(ev[i] - exact(np.arange(args.k)))):.2e}"
            print(f"{n:6d} {ev[i, -1]:14.8f} {order:>6s} {gap:12.2e} {err:>10s}")


if __name__ == "__main__":
    main()
