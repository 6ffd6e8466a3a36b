"""Sparse priors emulated by remapping parameters under variational-Laplace inference."""

__version__ = "0.1.0"

from .transforms import SparsifyConfig, sparsify, sparsify_inverse
from .glm import GlmModel, Scenario, make_design, simulate
from .vl import OptimOptions, Posterior, PriorSpec, infer
from .comparison import detect, p_zero, savage_dickey_log_bf
from .montecarlo import ModelSettings, SweepGrid, run_sweep

__all__ = [
    "SparsifyConfig", "sparsify", "sparsify_inverse",
    "GlmModel", "Scenario", "make_design", "simulate",
    "OptimOptions", "Posterior", "PriorSpec", "infer",
    "detect", "p_zero", "savage_dickey_log_bf",
    "ModelSettings", "SweepGrid", "run_sweep",
]
