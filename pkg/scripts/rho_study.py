"""Effect of the sigmoid temperature on model selection and zero detection.

For each rho, inverts sparse (rate 0.9) and Gaussian datasets at precision
10 and prints mean dF, the fraction of seeds favouring the right model and
the sparse-data TPR/TNR.

    python scripts/rho_study.py --rhos 1,0.1,0.01 --seeds 8
"""
import argparse

import numpy as np

from sparsevl.montecarlo import ModelSettings, SweepGrid, run_sweep
from sparsevl.transforms import SparsifyConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rhos", default="1,0.1,0.01")
    p.add_argument("--seeds", type=int, default=8)
    p.add_argument("--precision", type=float, default=10.0)
    args = p.parse_args()
    grid = SweepGrid((args.precision,), (0.9,), n_reps=args.seeds, base_seed=7)
    print(f"{'rho':>6} {'dF sparse':>10} {'right':>6} {'dF gauss':>10} {'right':>6} {'tpr':>5} {'tnr':>5}")
    for rho in (float(r) for r in args.rhos.split(",")):
        res = run_sweep(grid, ModelSettings(sparsify=SparsifyConfig(rho=rho)))
        sp = np.array([r.delta_F for r in res.records if r.scenario == "sparse"])
        ga = np.array([r.delta_F for r in res.records if r.scenario == "gaussian"])
        c = res.cell("sparse", args.precision, 0.9)
        print(f"{rho:6g} {sp.mean():10.2f} {np.mean(sp > 0):6.2f} {ga.mean():10.2f} "
              f"{np.mean(ga < 0):6.2f} {c.tpr:5.2f} {c.tnr:5.2f}")


if __name__ == "__main__":
    main()
