"""Command-line entry point: ``sparsevl {density,demo,sweep,bins}``.

Settings come from built-in defaults, then an optional JSON file given with
``--config``, then command-line flags.  Every command writes CSV files with
a header row into ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .comparison import DEFAULT_THRESHOLD, evaluate, p_zero, savage_dickey_log_bf
from .glm import Scenario, make_design, simulate
from .montecarlo import (
    ModelSettings, SweepGrid, iter_records, quantile_bins, read_records_csv,
    record_pairs, summarize, write_bins_csv, write_cells_csv, write_records_csv,
)
from .transforms import (
    SparsifyConfig, effective_regularizer, induced_density_analytic, induced_density_mc,
)
from .vl import OptimOptions, PriorSpec

log = logging.getLogger("sparsevl")

FORMAT_VERSION = "1"

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "out": "out",
    "rho": None,
    "omega": 2.0,
    "mode": "smoothed",
    "alpha2": 1.0,
    "fixed_sigma2": None,
    "noise_a0": 1e-3,
    "noise_b0": 1e-3,
    "eq9_literal": False,
    "threshold": DEFAULT_THRESHOLD,
    "max_iter": 256,
    "ny": 64,
    "ntheta": 128,
    "reps": 32,
    "precisions": [0.01, 0.1, 1.0, 10.0, 100.0],
    "rates": [0.0, 0.25, 0.5, 0.75, 0.9375],
    "scenario": "both",
    "precision": 10.0,
    "rate": 0.9,
    "n_samples": 1_000_000,
    "rhos": [1.0, 0.1, 0.01],
    "bin_width": 0.1,
    "range": 5.0,
    "n_bins": 10,
    "max_failure_rate": 0.02,
    "preset": None,
    "raw": None,
}

PRESETS = {
    # underdetermined main setting and the square control
    "main": {"ny": 64, "ntheta": 128},
    "square": {"ny": 32, "ntheta": 32},
    "paper": {"reps": 128},
}


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="sparsevl", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--rho", type=float, help="sigmoid temperature")
    common.add_argument("--omega", type=float, help="norm-order exponent")
    common.add_argument("--mode", choices=("hard", "smoothed"))
    common.add_argument("--alpha2", type=float, help="prior variance")
    common.add_argument("--fixed-sigma2", type=float, dest="fixed_sigma2",
                        help="fix the noise variance instead of estimating it")
    common.add_argument("--threshold", type=float,
                        help="declare non-zero when 1 - P(theta=0|y) >= threshold")
    common.add_argument("--ny", type=int)
    common.add_argument("--ntheta", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--eq9-literal", action="store_const", const=True, dest="eq9_literal",
                        help="count log-variance terms once, not per dimension")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", parents=[common], help="induced density of remapped weights")
    d.add_argument("--n-samples", type=int, dest="n_samples")
    d.add_argument("--rhos", type=_float_list, help="comma-separated temperatures")
    d.add_argument("--bin-width", type=float, dest="bin_width")
    d.add_argument("--range", type=float, help="histogram covers [-range, range]")

    m = sub.add_parser("demo", parents=[common], help="one sparse and one Gaussian dataset")
    m.add_argument("--precision", type=float, help="noise precision 1/sigma")
    m.add_argument("--rate", type=float, help="sparsity rate of the sparse dataset")

    s = sub.add_parser("sweep", parents=[common], help="Monte-Carlo grid sweep")
    s.add_argument("--precisions", type=_float_list)
    s.add_argument("--rates", type=_float_list)
    s.add_argument("--scenario", choices=("sparse", "gaussian", "both"))
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--n-bins", type=int, dest="n_bins")
    s.add_argument("--max-failure-rate", type=float, dest="max_failure_rate")

    b = sub.add_parser("bins", parents=[common], help="quantile bins from a raw records CSV")
    b.add_argument("raw", type=Path, help="raw records CSV written by sweep")
    b.add_argument("--n-bins", type=int, dest="n_bins")
    return p


def resolve_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as err:
            raise SystemExit(f"cannot read config {args.config}: {err}")
        if "format_version" in loaded and "config" in loaded:
            # a sweep manifest: rerun with the exact settings it records
            loaded = loaded["config"]
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    preset = getattr(args, "preset", None) or cfg.get("preset")
    if preset:
        cfg.update(PRESETS[preset])
        cfg["preset"] = preset
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("out", "raw"):
        if cfg[key] is not None:
            cfg[key] = str(cfg[key])
    return cfg


def sparsify_config(cfg, rho=None) -> SparsifyConfig:
    rho = rho if rho is not None else cfg["rho"]
    if cfg["mode"] == "hard":
        return SparsifyConfig.hard(cfg["omega"])
    return SparsifyConfig(rho=0.01 if rho is None else rho, omega=cfg["omega"])


def model_settings(cfg) -> ModelSettings:
    prior = PriorSpec(alpha2=cfg["alpha2"], noise_a0=cfg["noise_a0"], noise_b0=cfg["noise_b0"],
                      sigma2_fixed=cfg["fixed_sigma2"], scalar_log_variance=cfg["eq9_literal"])
    return ModelSettings(sparsify_config(cfg), prior, OptimOptions(max_iter=cfg["max_iter"]),
                         cfg["threshold"])


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise SystemExit(f"cannot create output directory {out}: {err}")
    return out


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in row])
    except OSError as err:
        raise SystemExit(f"cannot write {path}: {err}")


def cmd_density(cfg) -> int:
    out = _out_dir(cfg)
    half = cfg["range"]
    n_half = int(round(half / cfg["bin_width"]))
    edges = np.linspace(-half, half, 2 * n_half + 1)
    centers = 0.5 * (edges[1:] + edges[:-1])
    width = np.diff(edges)
    omega = cfg["omega"]

    if cfg["mode"] == "hard":
        configs = [("hard", SparsifyConfig.hard(omega))]
    else:
        rhos = [cfg["rho"]] if cfg["rho"] is not None else cfg["rhos"]
        configs = [(f"rho={r:g}", SparsifyConfig(rho=r, omega=omega)) for r in rhos]
        configs.append(("hard", SparsifyConfig.hard(omega)))
    columns = []
    for k, (_, sc) in enumerate(configs):
        mass = induced_density_mc(sc, cfg["n_samples"], edges, cfg["seed"])
        columns.append(mass / width)
    # MC columns are normalized over the window, so condition the analytic density on it too
    in_window = math.erf(half ** (1.0 / omega) / math.sqrt(2.0))
    analytic = [float(induced_density_analytic(c, omega)) / in_window if c != 0 else math.nan
                for c in centers]
    header = ["bin_center"] + [f"density_{name}" for name, _ in configs] + ["analytic"]
    rows = [[centers[i]] + [col[i] for col in columns] + [analytic[i]]
            for i in range(centers.size)]
    _write_csv(out / "density.csv", header, rows)

    grid = centers[centers != 0]
    reg = effective_regularizer(grid, omega)
    # l1 reference |t|/2 shifted to agree with the regularizer at |t| = 1
    shift = float(effective_regularizer(1.0, omega)) - 0.5
    _write_csv(out / "regularizer.csv", ["theta_tilde", "neg_log_density", "l1_reference"],
               [[t, r, 0.5 * abs(t) + shift] for t, r in zip(grid, reg)])
    log.info("wrote %s and %s", out / "density.csv", out / "regularizer.csv")
    return 0


def cmd_demo(cfg) -> int:
    out = _out_dir(cfg)
    settings = model_settings(cfg)
    sigma = 1.0 / cfg["precision"]
    summary, posterior_rows, fit_rows = [], [], []
    for k, scen in enumerate((Scenario.sparse(cfg["rate"]), Scenario.gaussian())):
        model = make_design(cfg["ny"], cfg["ntheta"], [cfg["seed"], k, 0])
        data = simulate(model, scen, sigma, [cfg["seed"], k, 1])
        try:
            rec, post_s, post_g = evaluate(data, settings.sparsify, settings.prior,
                                           settings.opts, settings.threshold)
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as err:
            log.error("inversion of the %s dataset failed: %s", scen.kind, err)
            return 1
        for name, post, m, r in (("sparse", post_s, model.with_mapping(settings.sparsify),
                                  rec.r_sparse),
                                 ("gaussian", post_g, model, rec.r_gauss)):
            summary.append([scen.kind, name, post.free_energy, post.sigma2, r,
                            post.n_iter, post.converged, rec.delta_F])
            sd = np.sqrt(np.diag(post.Sigma))
            pz = p_zero(savage_dickey_log_bf(post.mu, np.diag(post.Sigma),
                                             settings.prior.alpha2))
            w = m.weights(post.mu)
            for i in range(model.n_theta):
                posterior_rows.append([scen.kind, name, i, data.theta_true[i], post.mu[i],
                                       sd[i], w[i], pz[i]])
            yhat = m.predict(post.mu)
            for i in range(model.n_y):
                fit_rows.append([scen.kind, name, i, data.y[i], yhat[i]])
        log.info("%s data: dF = %.2f, r_sparse = %.3f, r_gauss = %.3f",
                 scen.kind, rec.delta_F, rec.r_sparse, rec.r_gauss)
    _write_csv(out / "demo_summary.csv",
               ["scenario", "model", "free_energy", "sigma2", "weight_correlation",
                "n_iter", "converged", "delta_F"], summary)
    _write_csv(out / "demo_posterior.csv",
               ["scenario", "model", "index", "theta_true", "mu", "sd", "weight_estimate",
                "p_zero"], posterior_rows)
    _write_csv(out / "demo_fit.csv", ["scenario", "model", "index", "y", "y_fit"], fit_rows)
    return 0


def _manifest(cfg, grid, complete, wall_time, n_records, n_failed):
    return {
        "format_version": FORMAT_VERSION,
        "sparsevl_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config": cfg,
        "grid": asdict(grid),
        "complete": complete,
        "n_records": n_records,
        "n_failed": n_failed,
        "wall_time_s": wall_time,
    }


def cmd_sweep(cfg) -> int:
    out = _out_dir(cfg)
    grid = SweepGrid(precisions=tuple(cfg["precisions"]), sparsity_rates=tuple(cfg["rates"]),
                     n_reps=cfg["reps"], n_y=cfg["ny"], n_theta=cfg["ntheta"],
                     base_seed=cfg["seed"], scenario=cfg["scenario"])
    settings = model_settings(cfg)
    records = []
    complete = False
    t0 = time.perf_counter()
    try:
        for rec in iter_records(grid, settings, cfg["jobs"]):
            records.append(rec)
        complete = True
    except KeyboardInterrupt:
        log.warning("interrupted after %d records; writing partial results", len(records))
    wall = time.perf_counter() - t0

    result = summarize(grid, records)
    write_records_csv(out / "raw.csv", records)
    write_cells_csv(out / "cells.csv", result)
    pairs = record_pairs(records)
    if len(pairs) >= cfg["n_bins"]:
        write_bins_csv(out / "bins.csv", quantile_bins(pairs, cfg["n_bins"]))
    else:
        log.warning("only %d usable records; bins.csv not written", len(pairs))
    manifest = _manifest(cfg, grid, complete, wall, len(records), result.n_failed)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if not complete:
        return 130
    failure_rate = result.n_failed / max(len(records), 1)
    if failure_rate > cfg["max_failure_rate"]:
        log.error("%.1f%% of replications failed", 100 * failure_rate)
        return 1
    return 0


def cmd_bins(cfg) -> int:
    out = _out_dir(cfg)
    try:
        records = read_records_csv(cfg["raw"])
    except OSError as err:
        raise SystemExit(f"cannot read {cfg['raw']}: {err}")
    bins = quantile_bins(record_pairs(records), cfg["n_bins"])
    write_bins_csv(out / "bins.csv", bins)
    return 0


COMMANDS = {"density": cmd_density, "demo": cmd_demo, "sweep": cmd_sweep, "bins": cmd_bins}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = resolve_config(args)
    try:
        return COMMANDS[args.command](cfg)
    except ValueError as err:
        log.error("%s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
