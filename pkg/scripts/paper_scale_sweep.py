"""Full-scale sweeps: 128 replications in the 64x128 and 32x32 settings.

Writes ``<out>/main`` and ``<out>/square`` (raw, cells, bins, manifest).
Roughly 0.5 s per replication on one core at 64x128; use --jobs to spread.

    python scripts/paper_scale_sweep.py --out runs/full --jobs 8
"""
import argparse
import sys
from pathlib import Path

from sparsevl.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/full"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    common = ["--preset", "paper", "--reps", "128", "--jobs", str(args.jobs),
              "--seed", str(args.seed), "-v"]
    codes = [
        cli_main(["sweep", "--out", str(args.out / "main"), "--ny", "64", "--ntheta", "128"] + common),
        cli_main(["sweep", "--out", str(args.out / "square"), "--ny", "32", "--ntheta", "32",
                  "--scenario", "sparse"] + common),
    ]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
