"""Eigenvalue convergence of the discrete Dirac operator against the torus oracle.

Usage: python3 scripts/eigen_convergence.py [--n 2] [--m-list 4,8,16] [--mass 0.0]
"""
import argparse

from whitney_dirac.mesh import Lattice
from whitney_dirac.spectra import convergence_study, torus_dirac_oracle


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--m-list", default="4,8,16")
    ap.add_argument("--mass", type=float, default=0.0)
    args = ap.parse_args()
    ms = [int(v) for v in args.m_list.split(",")]
    oracle = torus_dirac_oracle(args.n, 1.0, mass=args.mass)
    targets = sorted({v for v, _ in oracle.levels if v > max(args.mass, 1e-9)})[:2]
    st = convergence_study([Lattice.cube(args.n, m) for m in ms], targets, mass=args.mass)
    print(f"n={args.n} mass={args.mass}")
    print(f"{'target':>10} {'m':>4} {'error':>12}")
    for fit in st.fits:
        for m, e in zip(st.ms, fit.errors):
            print(f"{fit.target:10.6f} {m:4d} {e:12.4e}")
        print(f"{'':10} order {fit.slope:.3f} (R^2 {fit.r2:.4f})")
    print("spurious candidates per mesh:", [len(s) for s in st.spurious])


if __name__ == "__main__":
    main()
