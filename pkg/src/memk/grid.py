"""Uniform time grids, sampled signals and diagonal initial states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_1d, check_scalar
from .errors import GridMismatch


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * dt`` for ``k = 0 .. steps``."""

    dt: float
    steps: int

    def __post_init__(self):
        check_scalar(self.dt, "dt", min_val=0.0, include_min=False)
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def covering(cls, horizon, dt):
        """Smallest grid with spacing ``dt`` whose last point reaches ``horizon``."""
        steps = max(1, math.ceil(horizon / dt - 1e-9))
        return cls(dt=float(dt), steps=steps)

    @property
    def times(self):
        return self.dt * np.arange(self.steps + 1)

    @property
    def horizon(self):
        return self.dt * self.steps

    def __len__(self):
        return self.steps + 1

    def refined(self, factor=2):
        return TimeGrid(self.dt / factor, self.steps * factor)

    def matches(self, other, rtol=1e-12):
        return self.steps == other.steps and math.isclose(self.dt, other.dt, rel_tol=rtol)


@dataclass(frozen=True, eq=False)
class Signal:
    """Real signal sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = check_1d(self.values, "signal values")
        if values.shape[0] != len(self.grid):
            raise GridMismatch(f"signal has {values.shape[0]} samples, grid expects {len(self.grid)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, grid):
        return cls(grid, np.asarray(func(grid.times), dtype=float))

    @property
    def times(self):
        return self.grid.times

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def max_abs_diff(self, other):
        require_same_grid(self, other)
        return float(np.max(np.abs(self.values - other.values)))

    def scaled(self, factor):
        return Signal(self.grid, self.values * factor)

    def subsample(self, stride):
        """Every ``stride``-th sample, on the correspondingly coarser grid."""
        if self.grid.steps % stride:
            raise GridMismatch(f"steps={self.grid.steps} not divisible by stride {stride}")
        return Signal(TimeGrid(self.grid.dt * stride, self.grid.steps // stride), self.values[::stride])


def require_same_grid(*signals):
    first = signals[0].grid
    for s in signals[1:]:
        if not first.matches(s.grid):
            raise GridMismatch(f"grids differ: {first} vs {s.grid}")


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Initial state diagonal in the observable's eigenbasis, weights ``c_j``."""

    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = check_1d(self.weights, "weights")
        if np.any(w < 0):
            raise ValueError("state weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"state weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def pure(cls, index, dimension):
        w = np.zeros(dimension)
        w[index] = 1.0
        return cls(w)

    @classmethod
    def mixture(cls, indices, dimension, probabilities=None):
        w = np.zeros(dimension)
        p = np.full(len(indices), 1.0 / len(indices)) if probabilities is None else np.asarray(probabilities, float)
        np.add.at(w, np.asarray(indices), p)
        return cls(w / w.sum())

    @property
    def dimension(self):
        return self.weights.shape[0]
