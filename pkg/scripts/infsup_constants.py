"""Discrete and weak inf-sup constants of the Dirac form on the complement of the harmonic forms.

Usage: python3 scripts/infsup_constants.py [--s 0.3]
"""
import argparse
import json

from whitney_dirac.mesh import Lattice
from whitney_dirac.spectra import infsup_study
from whitney_dirac.whitney import assemble_complex


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--s", type=float, default=0.3)
    args = ap.parse_args()
    for n, ms in ((1, (4, 8, 16, 32)), (2, (4, 8, 16))):
        rep = infsup_study([assemble_complex(Lattice.cube(n, m)) for m in ms], s=args.s)
        print(json.dumps(rep.to_dict(), indent=1))


if __name__ == "__main__":
    main()
