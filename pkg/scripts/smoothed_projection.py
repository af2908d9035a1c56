"""Smoothed projection: projection, commutation, stability, rates and delta(eps).

Usage: python3 scripts/smoothed_projection.py [--eps 0.25] [--q 3]
"""
import argparse

import numpy as np

from whitney_dirac.mesh import Lattice
from whitney_dirac.mollify import Mollifier, delta_study, projector_suite, rate_experiment
from whitney_dirac.whitney import assemble_complex


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--q", type=int, default=3)
    args = ap.parse_args()
    for n, k in ((1, 0), (2, 0), (2, 1)):
        moll = Mollifier(n, args.q, args.eps)
        rep = projector_suite([assemble_complex(Lattice.cube(n, m)) for m in (4, 8, 16)], k, moll)
        print(f"n={n} k={k}: cond {np.round(rep.cond, 3).tolist()}  L2 norm {np.round(rep.stability, 4).tolist()}")
        for m, row in zip(rep.ms, rep.commutation):
            print(f"    m={m:3d} commutation by quadrature order {rep.commutation_orders}: "
                  + " ".join(f"{v:.1e}" for v in row))
    cxs = [assemble_complex(Lattice.cube(1, m)) for m in (4, 8, 16, 32)]
    rate = rate_experiment(cxs, Mollifier(1, args.q, args.eps), fractional=True)
    print(f"n=1 rates: projection {rate.projection_order:.3f}, smoothing {rate.smoothing_order:.3f}, "
          f"Slobodetskij(s={rate.s}) {rate.fractional_order:.3f}")
    cx = cxs[1]
    u = cx.interpolate(0, lambda x: np.sin(2 * np.pi * x[:, :1]))
    eps = (0.4, 0.3, 0.2, 0.1)
    print("delta(eps):", dict(zip(eps, np.round(delta_study(cx, 0, u, eps, q=args.q), 6).tolist())))


if __name__ == "__main__":
    main()
