"""Variational-Laplace inversion of GLMs with Gaussian priors.

The posterior is approximated by ``N(mu, Sigma)`` where ``mu`` maximizes the
log-joint (variational energy) and ``Sigma`` is the inverse Gauss-Newton
curvature at ``mu``.  The free energy ``I(mu) + 0.5 log|Sigma| +
(n_theta / 2) log 2 pi`` approximates the log evidence; it is exact when the
mapping is linear and the noise variance is fixed.

The effective l2 weight of the prior relative to the data is
``sigma2 / alpha2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg

from .glm import DimensionMismatch, GlmModel
from .transforms import sparsify_inverse

__all__ = [
    "PriorSpec",
    "OptimOptions",
    "Posterior",
    "LinearSolveFailure",
    "NotPositiveDefinite",
    "variational_energy",
    "energy_gradient",
    "gauss_newton_hessian",
    "update_noise",
    "free_energy",
    "infer",
]

LOG_2PI = math.log(2.0 * math.pi)
MAX_DAMPING_RETRIES = 40


class LinearSolveFailure(RuntimeError):
    pass


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Prior ``theta ~ N(0, alpha2 I)`` and noise model.

    The noise precision has a ``Gamma(noise_a0, noise_b0)`` hyperprior and is
    re-estimated during inversion unless ``sigma2_fixed`` is given.
    ``scalar_log_variance`` counts ``log sigma2`` and ``log alpha2`` once in
    the energy instead of once per observation/parameter.
    """

    alpha2: float = 1.0
    noise_a0: float = 1e-3
    noise_b0: float = 1e-3
    sigma2_fixed: float | None = None
    scalar_log_variance: bool = False

    def __post_init__(self):
        if not self.alpha2 > 0:
            raise ValueError("alpha2 must be positive")
        if self.noise_a0 < 0 or self.noise_b0 < 0:
            raise ValueError("noise hyperparameters must be nonnegative")
        if self.sigma2_fixed is not None and not self.sigma2_fixed > 0:
            raise ValueError("sigma2_fixed must be positive")


@dataclass(frozen=True)
class OptimOptions:
    max_iter: int = 256
    energy_tol: float = 1e-9
    step_tol: float = 1e-10
    noise_tol: float = 1e-4
    init: Literal["zero", "ridge", "random"] = "ridge"
    init_scale: float = 0.1
    init_seed: int = 0
    lm_damping_init: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if min(self.energy_tol, self.step_tol, self.noise_tol, self.lm_damping_init) <= 0:
            raise ValueError("tolerances and damping must be positive")
        if self.init not in ("zero", "ridge", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(eq=False)
class Posterior:
    mu: np.ndarray
    Sigma: np.ndarray
    free_energy: float
    sigma2: float
    n_iter: int
    converged: bool
    energy_trace: list = field(default_factory=list)

    def to_dict(self, full_covariance=False) -> dict:
        d = {
            "mu": self.mu.tolist(),
            "Sigma_diag": np.diag(self.Sigma).tolist(),
            "free_energy": self.free_energy,
            "sigma2": self.sigma2,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }
        if full_covariance:
            d["Sigma"] = self.Sigma.tolist()
        return d


def _check_y(model, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_y,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({model.n_y},)")
    return y


def variational_energy(theta, model: GlmModel, prior: PriorSpec, sigma2, y) -> float:
    """Log-joint ``log p(y | theta) + log p(theta)`` under Gaussian noise and prior."""
    y = _check_y(model, y)
    theta = np.asarray(theta, dtype=float)
    r = y - model.predict(theta)
    n_y, n_th = model.n_y, model.n_theta
    k_y, k_th = (1, 1) if prior.scalar_log_variance else (n_y, n_th)
    return -0.5 * (
        n_y * LOG_2PI + k_y * math.log(sigma2) + (r @ r) / sigma2
        + n_th * LOG_2PI + k_th * math.log(prior.alpha2) + (theta @ theta) / prior.alpha2
    )


def energy_gradient(theta, model: GlmModel, prior: PriorSpec, sigma2, y):
    y = _check_y(model, y)
    theta = np.asarray(theta, dtype=float)
    J = model.jacobian(theta)
    return J.T @ (y - model.predict(theta)) / sigma2 - theta / prior.alpha2


def _precision(J, alpha2, sigma2):
    A = J.T @ J / sigma2
    A[np.diag_indices_from(A)] += 1.0 / alpha2
    return A


def gauss_newton_hessian(theta, model: GlmModel, prior: PriorSpec, sigma2):
    """Gauss-Newton Hessian of the energy; always negative-definite."""
    return -_precision(model.jacobian(theta), prior.alpha2, sigma2)


def update_noise(residual_ss, trace_term, n_y, prior: PriorSpec) -> float:
    """Noise variance ``b / a`` from the conjugate Gamma update of the precision.

    ``trace_term`` is ``tr(J Sigma J^T)``, the expected extra residual due to
    posterior uncertainty.
    """
    a = prior.noise_a0 + 0.5 * n_y
    b = prior.noise_b0 + 0.5 * (residual_ss + trace_term)
    return b / a


def _logdet_pd(M):
    try:
        L = linalg.cholesky(M, lower=True)
    except linalg.LinAlgError as err:
        raise NotPositiveDefinite(str(err)) from None
    return 2.0 * np.log(np.diag(L)).sum()


def free_energy(mu, Sigma, model: GlmModel, prior: PriorSpec, sigma2, y) -> float:
    """Laplace log-evidence ``I(mu) + 0.5 log|Sigma| + (n_theta / 2) log 2 pi``."""
    logdet = _logdet_pd(np.asarray(Sigma, dtype=float))
    return (variational_energy(mu, model, prior, sigma2, y)
            + 0.5 * logdet + 0.5 * model.n_theta * LOG_2PI)


def _covariance(J, alpha2, sigma2):
    A = _precision(J, alpha2, sigma2)
    try:
        cf = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as err:
        raise NotPositiveDefinite(str(err)) from None
    Sigma = linalg.cho_solve(cf, np.eye(A.shape[0]))
    return 0.5 * (Sigma + Sigma.T)


def _noise_update_at(theta, model, prior, sigma2, y):
    J = model.jacobian(theta)
    r = y - model.predict(theta)
    Sigma = _covariance(J, prior.alpha2, sigma2)
    # effective number of parameters determined by the data
    gamma = float(np.sum((J @ Sigma) * J)) / sigma2
    # self-consistent solution of update_noise with trace_term = gamma * sigma2;
    # same fixed point as iterating update_noise, without its slow EM crawl
    return (prior.noise_b0 + 0.5 * float(r @ r)) / (prior.noise_a0 + 0.5 * (model.n_y - gamma))


def _initial_theta(model, prior, y, opts, sigma2):
    n = model.n_theta
    if opts.init == "zero":
        return np.zeros(n)
    if opts.init == "random":
        return opts.init_scale * np.random.default_rng(opts.init_seed).standard_normal(n)
    # ridge solution of the identity-mapping model, pulled back through the map
    X = model.X
    A = _precision(X, prior.alpha2, sigma2)
    w = linalg.solve(A, X.T @ y / sigma2, assume_a="pos")
    if model.sparsify is None:
        return w
    return np.asarray(sparsify_inverse(w, model.sparsify), dtype=float)


def _initial_sigma2(y, prior):
    if prior.sigma2_fixed is not None:
        return prior.sigma2_fixed
    # noise cannot exceed the data variance around zero
    return max(float(y @ y) / y.size, 1e-12)


def infer(model: GlmModel, prior: PriorSpec, y, opts: OptimOptions | None = None) -> Posterior:
    """Levenberg-Marquardt ascent of the variational energy.

    A step solves ``(-H + lam I) d = grad`` and is kept only if it increases
    the energy at the current noise variance; otherwise ``lam`` grows tenfold.
    When the noise is not fixed, its variance is refreshed after every
    accepted step.  ``energy_trace`` holds the energy after each accepted
    step, evaluated at the noise variance that step was accepted under.
    """
    opts = opts or OptimOptions()
    y = _check_y(model, y)
    alpha2 = prior.alpha2
    estimate_noise = prior.sigma2_fixed is None
    sigma2 = _initial_sigma2(y, prior)

    theta = _initial_theta(model, prior, y, opts, sigma2)
    if estimate_noise:
        sigma2 = _noise_update_at(theta, model, prior, sigma2, y)
    energy = variational_energy(theta, model, prior, sigma2, y)
    lam = opts.lm_damping_init
    trace = []
    converged = False
    n_iter = 0
    eye = np.eye(model.n_theta)

    for n_iter in range(1, opts.max_iter + 1):
        J = model.jacobian(theta)
        grad = J.T @ (y - model.predict(theta)) / sigma2 - theta / alpha2
        A = _precision(J, alpha2, sigma2)
        accepted = False
        for _ in range(MAX_DAMPING_RETRIES):
            try:
                step = linalg.solve(A + lam * eye, grad, assume_a="pos")
            except linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                cand = theta + step
                cand_energy = variational_energy(cand, model, prior, sigma2, y)
                if cand_energy > energy:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no ascent direction left at any damping: stationary up to round-off
            gnorm = np.max(np.abs(grad))
            converged = gnorm <= 1e-5 * (1.0 + abs(energy))
            if not converged and step is None:
                raise LinearSolveFailure("damped Gauss-Newton system could not be solved")
            break

        lam = max(lam / 10.0, opts.lm_damping_init)
        rel_change = (cand_energy - energy) / max(abs(energy), 1e-300)
        theta = cand
        trace.append(cand_energy)
        small = rel_change < opts.energy_tol or np.max(np.abs(step)) < opts.step_tol
        if estimate_noise:
            new_sigma2 = _noise_update_at(theta, model, prior, sigma2, y)
            small = small and abs(new_sigma2 - sigma2) <= opts.noise_tol * sigma2
            sigma2 = new_sigma2
            energy = variational_energy(theta, model, prior, sigma2, y)
        else:
            energy = cand_energy
        if small:
            converged = True
            break

    J = model.jacobian(theta)
    Sigma = _covariance(J, alpha2, sigma2)
    F = free_energy(theta, Sigma, model, prior, sigma2, y)
    return Posterior(theta, Sigma, F, sigma2, n_iter, bool(converged), trace)
