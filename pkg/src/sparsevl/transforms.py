"""Sparsify remapping of parameters and the densities it induces.

A Gaussian prior on native parameters ``theta`` becomes a heavy-tailed
prior on the remapped weights ``sparsify(theta)``.  With the hard signed
square (``omega=2``) the negative log-prior on the weights is ``|w|/2``
up to a constant, i.e. an l1 penalty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import expit

__all__ = [
    "SparsifyConfig",
    "sigmoid",
    "sparsify",
    "sparsify_deriv",
    "sparsify_inverse",
    "induced_density_analytic",
    "induced_density_mc",
    "effective_regularizer",
    "EmptyBins",
]

_LOG_2PI = math.log(2.0 * math.pi)


class EmptyBins(ValueError):
    """No Monte-Carlo sample landed inside the histogram range."""


@dataclass(frozen=True)
class SparsifyConfig:
    """Shape of the sparsify map.

    Attributes:
        rho: sigmoid temperature, only used in ``"smoothed"`` mode.
        omega: exponent applied to ``|theta|``; 2 emulates an l1 prior,
            1 leaves the prior Gaussian.
        mode: ``"hard"`` uses ``sign(theta)``, ``"smoothed"`` uses
            ``2 * sigmoid(theta, rho) - 1``.
    """

    rho: float = 0.01
    omega: float = 2.0
    mode: Literal["hard", "smoothed"] = "smoothed"

    def __post_init__(self):
        if self.mode not in ("hard", "smoothed"):
            raise ValueError(f"unknown sparsify mode {self.mode!r}")
        if self.mode == "smoothed" and not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.omega >= 1:
            raise ValueError(f"omega must be >= 1, got {self.omega}")

    @classmethod
    def hard(cls, omega: float = 2.0) -> "SparsifyConfig":
        return cls(rho=0.0, omega=omega, mode="hard")


def sigmoid(x, rho=1.0):
    """Logistic ``1 / (1 + exp(-x / rho))``; saturates without overflow."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return expit(np.asarray(x, dtype=float) / rho)[()]


def _signed_gate(theta, cfg):
    # 2 * sigmoid(theta, rho) - 1 == tanh(theta / (2 rho)), without cancellation at 0
    if cfg.mode == "hard":
        return np.sign(theta)
    return np.tanh(theta / (2.0 * cfg.rho))


def sparsify(theta, cfg: SparsifyConfig):
    """Map native parameters to weights, elementwise."""
    theta = np.asarray(theta, dtype=float)
    return (_signed_gate(theta, cfg) * np.abs(theta) ** cfg.omega)[()]


def sparsify_deriv(theta, cfg: SparsifyConfig):
    """Exact derivative of :func:`sparsify`, elementwise.

    The hard map is C1 for every ``omega >= 1``: the derivative at zero is 1
    for ``omega == 1`` and 0 otherwise.
    """
    theta = np.asarray(theta, dtype=float)
    a = np.abs(theta)
    om = cfg.omega
    if om == 1.0:
        power_deriv = np.ones_like(a)
    else:
        power_deriv = om * a ** (om - 1.0)
    if cfg.mode == "hard":
        return power_deriv[()]
    gate = np.tanh(theta / (2.0 * cfg.rho))
    # d/dtheta tanh(theta / 2rho) = (2 / rho) s (1 - s)
    s = expit(theta / cfg.rho)
    gate_deriv = (2.0 / cfg.rho) * s * (1.0 - s)
    # sign(theta) * gate == |gate|, so the second term stays finite at 0
    return (gate_deriv * a**om + np.abs(gate) * power_deriv)[()]


def _smoothed_root(target, cfg, tol=1e-12, max_iter=200):
    # solve sparsify(x) = target for x >= 0 given target >= 0
    if target == 0.0:
        return 0.0
    lo = 0.0
    # tanh < 1, so the root lies above target ** (1 / omega)
    hi = max(target ** (1.0 / cfg.omega), cfg.rho)
    while sparsify(hi, cfg) < target:
        lo = hi
        hi *= 2.0
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = sparsify(x, cfg) - target
        if fx == 0.0:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        d = sparsify_deriv(x, cfg)
        step_ok = d > 0
        if step_ok:
            x_new = x - fx / d
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < tol or hi - lo < tol:
            return x_new
        x = x_new
    return x


def sparsify_inverse(theta_tilde, cfg: SparsifyConfig):
    """Inverse of :func:`sparsify`, elementwise.

    Closed form in hard mode; safeguarded Newton/bisection otherwise
    (absolute tolerance 1e-12).
    """
    t = np.asarray(theta_tilde, dtype=float)
    if cfg.mode == "hard":
        return (np.sign(t) * np.abs(t) ** (1.0 / cfg.omega))[()]
    flat = t.ravel()
    out = np.array([math.copysign(_smoothed_root(abs(v), cfg), v) for v in flat])
    return out.reshape(t.shape)[()]


def induced_density_analytic(theta_tilde, omega=2.0):
    """Density of ``sign(z) |z|**omega`` for ``z ~ N(0, 1)``.

    For ``omega > 1`` the density diverges at 0, where ``ZeroDivisionError``
    is raised.
    """
    return np.exp(-effective_regularizer(theta_tilde, omega))


def effective_regularizer(theta_tilde, omega=2.0):
    """``-log`` of :func:`induced_density_analytic`, constants included."""
    t = np.abs(np.asarray(theta_tilde, dtype=float))
    if omega > 1 and np.any(t == 0):
        raise ZeroDivisionError("induced density is singular at 0")
    with np.errstate(divide="ignore"):
        log_t = np.log(t)
    # z = t ** (1 / omega); p(t) = phi(z) * dz/dt
    log_jac = -math.log(omega) + (1.0 / omega - 1.0) * log_t if omega != 1 else 0.0 * t
    return (0.5 * _LOG_2PI + 0.5 * t ** (2.0 / omega) - log_jac)[()]


def induced_density_mc(cfg: SparsifyConfig, n_samples: int, bin_edges, seed: int):
    """Histogram of remapped standard-normal draws.

    Returns the probability mass per bin, normalized over the samples that
    fall inside ``[bin_edges[0], bin_edges[-1]]``.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly increasing")
    rng = np.random.default_rng(seed)
    w = sparsify(rng.standard_normal(n_samples), cfg)
    counts, _ = np.histogram(w, bins=edges)
    total = counts.sum()
    if total == 0:
        raise EmptyBins(f"no samples in [{edges[0]}, {edges[-1]}]")
    return counts / total
