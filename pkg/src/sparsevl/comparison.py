"""Sparse-vs-Gaussian model comparison and zero detection.

Posterior zero probabilities come from Savage-Dickey ratios, so the reduced
models (one parameter pinned at 0) are never inverted.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .glm import GlmModel, SimulatedDataset
from .transforms import SparsifyConfig
from .vl import OptimOptions, Posterior, PriorSpec, infer

__all__ = [
    "ZeroDetection",
    "ComparisonRecord",
    "savage_dickey_log_bf",
    "p_zero",
    "detect",
    "detection_rates",
    "weight_correlation",
    "compare_models",
    "evaluate",
    "RECORD_FIELDS",
]

DEFAULT_THRESHOLD = 0.95


def savage_dickey_log_bf(mu, sigma2_ii, alpha2):
    """Log Bayes factor of the full model against ``theta_i = 0``.

    Log prior density at zero minus log Gaussian posterior marginal density
    at zero, for each parameter.
    """
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(sigma2_ii, dtype=float)
    return (0.5 * np.log(s / alpha2) + 0.5 * mu**2 / s)[()]


def p_zero(log_bf):
    """``P(theta_i = 0 | y)`` under equal prior odds of the full and null models."""
    return expit(-np.asarray(log_bf, dtype=float))[()]


@dataclass(frozen=True, eq=False)
class ZeroDetection:
    p_zero: np.ndarray
    threshold: float
    declared_zero: np.ndarray

    @property
    def est_sparsity(self) -> float:
        return float(np.mean(self.declared_zero))


def detect(pz, threshold: float = DEFAULT_THRESHOLD) -> ZeroDetection:
    """Declare a parameter non-zero when ``1 - P(theta_i = 0 | y) >= threshold``.

    With the default 0.95 a parameter counts as non-zero only if its
    posterior zero probability is at most 5%.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    pz = np.atleast_1d(np.asarray(pz, dtype=float))
    return ZeroDetection(pz, threshold, (1.0 - pz) < threshold)


def detection_rates(declared_zero, true_zero):
    """``(tpr, tnr, est_sparsity)``; a rate with an empty denominator is NaN.

    Positive means truly non-zero and detected as non-zero; negative means
    truly zero and declared zero.
    """
    declared_zero = np.asarray(declared_zero, dtype=bool)
    true_zero = np.asarray(true_zero, dtype=bool)
    if declared_zero.shape != true_zero.shape:
        raise ValueError(f"mask shapes differ: {declared_zero.shape} vs {true_zero.shape}")
    n_pos = np.count_nonzero(~true_zero)
    n_neg = np.count_nonzero(true_zero)
    tp = np.count_nonzero(~true_zero & ~declared_zero)
    tn = np.count_nonzero(true_zero & declared_zero)
    tpr = tp / n_pos if n_pos else math.nan
    tnr = tn / n_neg if n_neg else math.nan
    return tpr, tnr, float(np.mean(declared_zero))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt((a @ a) * (b @ b))
    if den == 0.0:
        return math.nan
    return float(np.clip((a @ b) / den, -1.0, 1.0))


def weight_correlation(theta_true, posterior: Posterior, model: GlmModel) -> float:
    """Pearson correlation between true and estimated weights (NaN if either is constant)."""
    theta_true = np.asarray(theta_true, dtype=float)
    est = np.asarray(model.weights(posterior.mu), dtype=float)
    if theta_true.shape != est.shape:
        raise ValueError("theta_true and posterior have different lengths")
    return _pearson(theta_true, est)


def compare_models(post_sparse: Posterior, post_gauss: Posterior) -> float:
    """``F_sparse - F_gauss``; positive favours the sparse prior."""
    return post_sparse.free_energy - post_gauss.free_energy


RECORD_FIELDS = (
    "seed", "scenario", "precision", "sparsity_rate",
    "F_sparse", "F_gauss", "r_sparse", "r_gauss",
    "tpr", "tnr", "est_sparsity",
    "tp", "fn", "tn", "fp", "failed",
)


@dataclass
class ComparisonRecord:
    """One dataset inverted under both priors; the counts allow pooled rates."""

    seed: str
    scenario: str
    precision: float
    sparsity_rate: float
    F_sparse: float
    F_gauss: float
    r_sparse: float
    r_gauss: float
    tpr: float
    tnr: float
    est_sparsity: float
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0
    failed: bool = False

    @property
    def delta_F(self) -> float:
        return self.F_sparse - self.F_gauss

    @property
    def delta_r(self) -> float:
        return self.r_sparse - self.r_gauss

    def as_row(self) -> dict:
        return asdict(self)

    @classmethod
    def from_row(cls, row: dict) -> "ComparisonRecord":
        conv = {}
        for name, value in row.items():
            if name in ("seed", "scenario"):
                conv[name] = value
            elif name in ("tp", "fn", "tn", "fp"):
                conv[name] = int(value)
            elif name == "failed":
                conv[name] = value in (True, "True", "true", "1")
            elif name in RECORD_FIELDS:
                conv[name] = float(value)
        return cls(**conv)

    @classmethod
    def failure(cls, seed, scenario, precision, rate) -> "ComparisonRecord":
        nan = math.nan
        return cls(str(seed), scenario, precision, rate, nan, nan, nan, nan, nan, nan, nan,
                   failed=True)


def evaluate(dataset: SimulatedDataset, cfg: SparsifyConfig, prior: PriorSpec,
             opts: OptimOptions | None = None, threshold: float = DEFAULT_THRESHOLD,
             precision: float | None = None):
    """Invert ``dataset`` under sparse and Gaussian priors and score both.

    Returns ``(record, post_sparse, post_gauss)``; detection metrics come from
    the sparse model.
    """
    base = dataset.model.with_mapping(None)
    sparse_model = base.with_mapping(cfg)
    post_s = infer(sparse_model, prior, dataset.y, opts)
    post_g = infer(base, prior, dataset.y, opts)
    lbf = savage_dickey_log_bf(post_s.mu, np.diag(post_s.Sigma), prior.alpha2)
    det = detect(p_zero(lbf), threshold)
    tpr, tnr, est = detection_rates(det.declared_zero, dataset.zero_mask)
    true_zero = dataset.zero_mask
    dz = det.declared_zero
    rec = ComparisonRecord(
        seed=str(dataset.seed),
        scenario=dataset.scenario.kind,
        precision=precision if precision is not None else 1.0 / dataset.sigma_true,
        sparsity_rate=dataset.scenario.rate,
        F_sparse=float(post_s.free_energy),
        F_gauss=float(post_g.free_energy),
        r_sparse=weight_correlation(dataset.theta_true, post_s, sparse_model),
        r_gauss=weight_correlation(dataset.theta_true, post_g, base),
        tpr=tpr, tnr=tnr, est_sparsity=est,
        tp=int(np.count_nonzero(~true_zero & ~dz)),
        fn=int(np.count_nonzero(~true_zero & dz)),
        tn=int(np.count_nonzero(true_zero & dz)),
        fp=int(np.count_nonzero(true_zero & ~dz)),
    )
    return rec, post_s, post_g
