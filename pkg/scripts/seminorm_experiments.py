"""Seminorm equivalence, fractional inverse inequalities and the improved-regularity ratio.

Usage: python3 scripts/seminorm_experiments.py [--s 0.3] [--s2 0.4]
"""
import argparse

from whitney_dirac.mesh import Lattice
from whitney_dirac.norms import drift, equivalence_suite, improved_regularity_record, inverse_inequality_suite
from whitney_dirac.whitney import assemble_complex


def table(rec):
    print(f"  {rec.name}  expected exponent {rec.expected}")
    for m, smax, emax in zip(rec.ms, rec.sampled_max, rec.exact_max):
        print(f"    m={m:3d}  sampled max {smax:10.4f}  exact max {emax:10.4f}")
    print(f"    fitted exponent: sampled {rec.exponent:.3f}, exact {rec.exponent_exact:.3f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--s", type=float, default=0.3)
    ap.add_argument("--s2", type=float, default=0.4)
    args = ap.parse_args()
    for n in (1, 2):
        rec = equivalence_suite([assemble_complex(Lattice.cube(n, m)) for m in (4, 8, 16)])
        print(f"n={n} broken-H1 / domain seminorm: min {rec.exact_min} max {rec.exact_max} "
              f"(drift {drift(rec.exact_max):.3f})")
    cxs = [assemble_complex(Lattice.cube(1, m)) for m in (4, 8, 16, 32)]
    for rec in inverse_inequality_suite(cxs, args.s, args.s2).records:
        table(rec)
    table(improved_regularity_record(cxs, args.s))


if __name__ == "__main__":
    main()
