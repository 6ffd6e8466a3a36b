"""How far the Laplace free energy of the sparse model is from its evidence.

Part 1: two-parameter problems where the sparse-model evidence can be
integrated on a grid.  Part 2: Gaussian-scenario data with the noise
variance fixed at its true value.  There the Gaussian model is the
generating process, so the expected exact log Bayes factor of sparse vs
Gaussian is -KL <= 0; any positive average Laplace dF is approximation bias.

    python scripts/laplace_bias_check.py [--seeds 16]
"""
import argparse

import numpy as np
from scipy.special import logsumexp

from sparsevl import GlmModel, PriorSpec, Scenario, SparsifyConfig, infer, make_design, simulate
from sparsevl.transforms import sparsify


def grid_log_evidence(model, prior, y, half_width=6.0, n=1201):
    g = np.linspace(-half_width, half_width, n)
    d = g[1] - g[0]
    a, b = np.meshgrid(g, g, indexing="ij")
    thetas = np.stack([a.ravel(), b.ravel()], axis=1)
    cfg = model.sparsify
    w = sparsify(thetas, cfg)
    r = y[None, :] - w @ model.X.T
    s2 = prior.sigma2_fixed
    log_joint = (-0.5 * (r**2).sum(1) / s2 - 0.5 * len(y) * np.log(2 * np.pi * s2)
                 - 0.5 * (thetas**2).sum(1) - np.log(2 * np.pi))
    return logsumexp(log_joint) + 2 * np.log(d)


def low_dim(n_cases, rng):
    print("two parameters, one observation: Laplace F vs grid evidence (sparse model)")
    cfg = SparsifyConfig()
    prior = PriorSpec(sigma2_fixed=0.01)
    for k in range(n_cases):
        X = rng.normal(size=(1, 2))
        theta = rng.normal(size=2)
        y = X @ theta + 0.1 * rng.normal(size=1)
        m = GlmModel(X, cfg)
        post = infer(m, prior, y)
        exact = grid_log_evidence(m, prior, y)
        print(f"  case {k}: Laplace F = {post.free_energy:8.3f}  exact = {exact:8.3f}  "
              f"bias = {post.free_energy - exact:+.3f}")


def fixed_noise(n_seeds, precision):
    print(f"gaussian data, sigma2 fixed at truth, precision {precision:g}")
    cfg = SparsifyConfig()
    sigma = 1.0 / precision
    prior = PriorSpec(sigma2_fixed=sigma**2)
    dFs = []
    for s in range(n_seeds):
        base = make_design(64, 128, [s, 0])
        data = simulate(base, Scenario.gaussian(), sigma, [s, 1])
        ps = infer(base.with_mapping(cfg), prior, data.y)
        pg = infer(base, prior, data.y)
        dFs.append(ps.free_energy - pg.free_energy)
        near_zero = np.abs(ps.mu) < 0.05
        ratio = np.diag(ps.Sigma)[near_zero].mean() if near_zero.any() else np.nan
        print(f"  seed {s}: dF = {dFs[-1]:+7.2f}  inactive coords = {near_zero.sum():3d}  "
              f"mean Sigma_ii there = {ratio:.3f}")
    print(f"  mean dF = {np.mean(dFs):+.2f}  (exact expectation is <= 0)")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=16)
    p.add_argument("--precision", type=float, default=10.0)
    args = p.parse_args()
    low_dim(6, np.random.default_rng(0))
    fixed_noise(args.seeds, args.precision)


if __name__ == "__main__":
    main()
