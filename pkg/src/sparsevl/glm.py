"""Linear observation models ``y = X w + noise`` and their simulation.

The weights ``w`` either equal the parameters (identity mapping) or are
their sparsify remap ``w = sparsify(theta)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .transforms import SparsifyConfig, sparsify, sparsify_deriv

__all__ = [
    "DimensionMismatch",
    "GlmModel",
    "Scenario",
    "SimulatedDataset",
    "make_design",
    "simulate",
]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GlmModel:
    """Design matrix plus observation mapping.

    ``sparsify=None`` is the identity mapping ``g(theta) = X theta``;
    otherwise ``g(theta) = X sparsify(theta)``.
    """

    X: np.ndarray
    sparsify: SparsifyConfig | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionMismatch(f"X must be a nonempty matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

    @property
    def n_y(self) -> int:
        return self.X.shape[0]

    @property
    def n_theta(self) -> int:
        return self.X.shape[1]

    def with_mapping(self, cfg: SparsifyConfig | None) -> "GlmModel":
        return GlmModel(self.X, cfg)

    def weights(self, theta):
        """Weights multiplying the columns of X."""
        theta = self._check(theta)
        if self.sparsify is None:
            return theta
        return sparsify(theta, self.sparsify)

    def predict(self, theta):
        return self.X @ self.weights(theta)

    def jacobian(self, theta):
        theta = self._check(theta)
        if self.sparsify is None:
            return self.X
        return self.X * sparsify_deriv(theta, self.sparsify)

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_theta,):
            raise DimensionMismatch(
                f"theta has shape {theta.shape}, expected ({self.n_theta},)")
        return theta


def make_design(n_y: int, n_theta: int, seed) -> GlmModel:
    """Identity-mapping model with an i.i.d. standard normal design."""
    if n_y < 1 or n_theta < 1:
        raise DimensionMismatch("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    return GlmModel(rng.standard_normal((n_y, n_theta)))


@dataclass(frozen=True)
class Scenario:
    """``kind="sparse"`` zeroes ``floor(rate * n_theta)`` weights; ``"gaussian"`` none."""

    kind: str = "sparse"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sparse", "gaussian"):
            raise ValueError(f"unknown scenario {self.kind!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"sparsity rate must lie in [0, 1], got {self.rate}")
        if self.kind == "gaussian" and self.rate != 0.0:
            raise ValueError("gaussian scenario has no sparsity rate")

    @classmethod
    def gaussian(cls) -> "Scenario":
        return cls("gaussian", 0.0)

    @classmethod
    def sparse(cls, rate: float) -> "Scenario":
        return cls("sparse", rate)


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    model: GlmModel
    y: np.ndarray
    theta_true: np.ndarray
    sigma_true: float
    scenario: Scenario
    seed: object = None
    zero_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "zero_mask", self.theta_true == 0.0)

    def to_json(self) -> str:
        return json.dumps({
            "X": self.model.X.tolist(),
            "y": self.y.tolist(),
            "theta_true": self.theta_true.tolist(),
            "zero_mask": self.zero_mask.tolist(),
            "sigma_true": self.sigma_true,
            "scenario": {"kind": self.scenario.kind, "rate": self.scenario.rate},
            "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "SimulatedDataset":
        d = json.loads(text)
        return cls(
            model=GlmModel(np.array(d["X"], dtype=float)),
            y=np.array(d["y"], dtype=float),
            theta_true=np.array(d["theta_true"], dtype=float),
            sigma_true=float(d["sigma_true"]),
            scenario=Scenario(**d["scenario"]),
            seed=d.get("seed"),
        )


def simulate(model: GlmModel, scenario: Scenario, sigma: float, seed) -> SimulatedDataset:
    """Draw true weights and noisy observations for ``model``.

    Non-zero weights are standard normal; in the sparse scenario a uniformly
    random subset of ``floor(rate * n_theta)`` of them is set exactly to 0.
    """
    if model.sparsify is not None:
        raise ValueError("simulate expects an identity-mapping model")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    n = model.n_theta
    theta = rng.standard_normal(n)
    if scenario.kind == "sparse":
        n_zero = math.floor(scenario.rate * n + 1e-9)
        theta[rng.permutation(n)[:n_zero]] = 0.0
    y = model.X @ theta + sigma * rng.standard_normal(model.n_y)
    return SimulatedDataset(model, y, theta, float(sigma), scenario, seed)
