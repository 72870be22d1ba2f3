"""Grids, datasets, standardization, and predictive summaries.

These are the value types shared by every surrogate and by the active
learning driver.  All of them are immutable after construction and hold
64-bit floating point data.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Dataset",
    "EvaluationGrid",
    "PredictiveComponents",
    "PredictiveSummary",
    "Standardizer",
    "append",
    "fit_standardizer",
    "make_grid",
]

# Floor applied to every standard deviation so that standardization never
# divides by zero (constant targets in particular).
STD_FLOOR = 1e-12

Bounds = Sequence[tuple[float, float]]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_bounds(bounds: Bounds) -> tuple[tuple[float, float], ...]:
    if len(bounds) == 0:
        raise ValueError("bounds must have at least one dimension")
    out = []
    for k, (lo, hi) in enumerate(bounds):
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"bounds for dimension {k} must be finite, got ({lo}, {hi})")
        if not lo < hi:
            raise ValueError(f"bounds for dimension {k} must satisfy low < high, got ({lo}, {hi})")
        out.append((lo, hi))
    return tuple(out)


@dataclass(frozen=True)
class EvaluationGrid:
    """Dense rectangular candidate grid over the parameter domain.

    ``points`` holds the full cartesian product in row-major order (the last
    dimension varies fastest), one row per grid point.
    """

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    points: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(lo, hi, r) for (lo, hi), r in zip(self.bounds, self.resolution)
        )


def make_grid(bounds: Bounds, resolution: Sequence[int]) -> EvaluationGrid:
    """Build an evenly spaced grid with inclusive endpoints per dimension."""
    bounds = _check_bounds(bounds)
    if len(resolution) != len(bounds):
        raise ValueError("resolution must have one entry per dimension")
    resolution = tuple(int(r) for r in resolution)
    for k, r in enumerate(resolution):
        if r < 2:
            raise ValueError(f"resolution for dimension {k} must be >= 2, got {r}")
    axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(bounds, resolution)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return EvaluationGrid(bounds=bounds, resolution=resolution, points=_freeze(points))


@dataclass(frozen=True)
class Dataset:
    """Growing collection of (input vector, scalar observation) pairs.

    Inputs are raw domain coordinates and must lie inside ``bounds``;
    targets are raw observation units.  Instances are immutable; use
    :func:`append` to grow.
    """

    bounds: tuple[tuple[float, float], ...]
    inputs: np.ndarray
    targets: np.ndarray

    @staticmethod
    def create(bounds: Bounds, inputs, targets) -> "Dataset":
        bounds = _check_bounds(bounds)
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets must have equal length")
        if inputs.shape[0] < 1:
            raise ValueError("dataset must contain at least one observation")
        if inputs.shape[1] != len(bounds):
            raise ValueError("input dimension does not match bounds")
        if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(targets)):
            raise ValueError("dataset values must be finite")
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        if np.any(inputs < lo) or np.any(inputs > hi):
            raise ValueError("inputs must lie inside the declared bounds")
        return Dataset(bounds, _freeze(inputs), _freeze(targets))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def append(data: Dataset, x, y: float) -> Dataset:
    """Return a new dataset with one more (x, y) pair; prior entries unchanged."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = float(y)
    if x.shape[0] != data.dim:
        raise ValueError("appended input has wrong dimension")
    if not np.all(np.isfinite(x)) or not np.isfinite(y):
        raise ValueError("appended values must be finite")
    lo = np.array([b[0] for b in data.bounds])
    hi = np.array([b[1] for b in data.bounds])
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("appended input lies outside the declared bounds")
    inputs = np.vstack([data.inputs, x[None, :]])
    targets = np.concatenate([data.targets, [y]])
    return Dataset(data.bounds, _freeze(inputs), _freeze(targets))


@dataclass(frozen=True)
class Standardizer:
    """Affine maps between raw and standardized coordinates.

    Standardized values are (raw - mean) / std per dimension; stds are
    floored at ``STD_FLOOR`` so the round trip stays exact to 1e-12 relative.
    """

    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: float
    target_std: float

    @staticmethod
    def from_bounds(bounds: Bounds, targets) -> "Standardizer":
        """Bounds-based input scaling (inputs map onto [-1, 1]) with z-scored targets.

        This is the scheme the surrogates use: the candidate grid keeps a
        fixed representation across active-learning steps while the target
        scale tracks the current training set.
        """
        bounds = _check_bounds(bounds)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if targets.size < 1:
            raise ValueError("need at least one target")
        return Standardizer(
            input_mean=_freeze((lo + hi) / 2.0),
            input_std=_freeze(np.maximum((hi - lo) / 2.0, STD_FLOOR)),
            target_mean=float(targets.mean()),
            target_std=float(max(targets.std(), STD_FLOOR)),
        )

    def standardize_inputs(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.input_mean) / self.input_std

    def unstandardize_inputs(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.input_std + self.input_mean

    def standardize_targets(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def unstandardize_targets(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.target_std + self.target_mean

    def unstandardize_variance(self, v) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) * self.target_std**2


def fit_standardizer(data: Dataset) -> Standardizer:
    """Moment-based standardizer over the current dataset (population 1/n stds)."""
    return Standardizer(
        input_mean=_freeze(data.inputs.mean(axis=0)),
        input_std=_freeze(np.maximum(data.inputs.std(axis=0), STD_FLOOR)),
        target_mean=float(data.targets.mean()),
        target_std=float(max(data.targets.std(), STD_FLOOR)),
    )


@dataclass(frozen=True)
class PredictiveSummary:
    """Per-grid-point predictive mean and uncertainty, in raw target units."""

    mean: np.ndarray
    uncertainty: np.ndarray

    def __post_init__(self) -> None:
        if self.mean.shape != self.uncertainty.shape:
            raise ValueError("mean and uncertainty must have the same shape")


@dataclass(frozen=True)
class PredictiveComponents:
    """Per-draw predictive pieces over a set of query points, in raw units.

    ``means`` is (n_draws, n_points); ``latent_var`` is the per-draw variance
    of the latent function (zero for the network surrogate); ``noise_var`` is
    the per-draw observation-noise variance.
    """

    means: np.ndarray
    latent_var: np.ndarray
    noise_var: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.means.shape[0]

    def summarize(self, include_noise: bool) -> PredictiveSummary:
        """Ensemble mean and uncertainty.

        Uncertainty is the spread of per-draw means around the ensemble mean
        plus the average per-draw latent variance, optionally plus the average
        observation-noise variance (the two surrogates differ on whether
        acquisition sees the noise term).
        """
        mean = self.means.mean(axis=0)
        spread = self.means.var(axis=0)
        uncertainty = spread + self.latent_var.mean(axis=0)
        if include_noise:
            uncertainty = uncertainty + self.noise_var.mean()
        return PredictiveSummary(mean=_freeze(mean), uncertainty=_freeze(uncertainty))
