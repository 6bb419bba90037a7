"""Print the asymptotic constants: series constant, kappa for the strong and
inhomogeneous families, and the closed-form 3D kappa_1."""
import argparse
import json

from orbitcount import asym


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kmax", type=int, default=4)
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()
    out = {"series_constant": {k: asym.series_constant(k) for k in range(1, args.kmax + 1)}}
    strong = {}
    for k in range(2, args.kmax + 1):
        for l in range(1, k):
            est = asym.kappa_strong(k, l, args.tol, info=True)
            strong[f"{k},{l}"] = [est.value, est.error]
    out["kappa_strong"] = strong
    est = asym.kappa_inhomog(args.tol, info=True)
    out["kappa_inhomog"] = [est.value, est.error]
    out["kappa1_3d(2,2,1)"] = asym.kappa1_3d(2, 2, 1)
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
