"""Direct eigenvalue counts on the truncated lattice next to the conjectured
right-hand side, for a 2D field given on the command line."""
import argparse

import numpy as np

from orbitcount import asym, pipeline, spectra
from orbitcount.curves import CountingCurve
from orbitcount.liealg import SchrodingerSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("b", help="2D magnetic field, e.g. x1^2*x2")
    ap.add_argument("--lo", type=float, default=4.0)
    ap.add_argument("--hi", type=float, default=24.0)
    ap.add_argument("--steps", type=int, default=7)
    ap.add_argument("--ctrunc", type=float, default=8.0)
    ap.add_argument("--samples", type=int, default=200_000)
    args = ap.parse_args()
    spec = SchrodingerSpec.from_field_2d(args.b)
    lams = list(np.geomspace(args.lo, args.hi, args.steps))
    direct = CountingCurve(metadata={"method": "direct"})
    for lam in lams:
        res = spectra.count_masked(spec, lam, args.ctrunc, info=True)
        direct.add(lam, res.count, res.method)
        print(f"lam {lam:9.3f}  N {res.count:7d}  ({res.method})", flush=True)
    state = pipeline.run(spec, samples=args.samples)
    pred = asym.conjecture_rhs(spec, state.family, state.limit, None, lams)
    rep = asym.compare(direct, pred, min_decades=0.5)
    print(rep.table())


if __name__ == "__main__":
    main()
