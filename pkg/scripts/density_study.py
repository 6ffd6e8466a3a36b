"""Induced densities and effective regularizers for several norm exponents.

Runs the ``density`` command once per omega into ``<out>/omega=<w>``.

    python scripts/density_study.py --omegas 1,1.5,2,3
"""
import argparse
import sys
from pathlib import Path

from sparsevl.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/density"))
    p.add_argument("--omegas", default="1,1.5,2,3")
    args = p.parse_args()
    codes = [cli_main(["density", "--out", str(args.out / f"omega={w}"), "--omega", w])
             for w in args.omegas.split(",")]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
