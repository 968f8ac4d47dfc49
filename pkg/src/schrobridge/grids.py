"""Uniform space/time lattices and quadrature/stencil primitives.

Everything downstream (kernels, bridge factors, residual engines) runs on
the uniform grids defined here.  Quadrature is composite trapezoid;
spatial derivatives are second-order central differences with one-sided
second-order closures at the edges.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import NormalizationError, NumericDomainError

DEFAULT_X_MIN = -10.0
DEFAULT_X_MAX = 10.0
DEFAULT_N_POINTS = 513


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid; node i sits exactly at x_min + i*spacing."""

    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise NumericDomainError("grid endpoints must be finite")
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.n_points < 3:
            raise ValueError("need at least 3 grid points")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return _readonly(self.x_min + self.spacing * np.arange(self.n_points))

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights (h at interior nodes, h/2 at edges)."""
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return _readonly(w)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time lattice with n_steps intervals on [t_start, t_end]."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise NumericDomainError("time endpoints must be finite")
        if self.t_start < 0.0:
            raise ValueError("t_start must be nonnegative")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.n_steps < 1:
            raise ValueError("need at least one time step")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return _readonly(self.t_start + self.dt * np.arange(self.n_steps + 1))


@dataclass(frozen=True)
class ScalarField:
    """Real-valued samples on a Grid1D at a single time label.

    Values are copied and frozen at construction; non-finite entries are
    rejected so downstream quadrature never sees NaN/inf.
    """

    grid: Grid1D
    values: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has {vals.shape} values for a {self.grid.n_points}-node grid")
        if not np.all(np.isfinite(vals)):
            raise NumericDomainError("field values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return dataclasses.replace(self, values=values)


def sample_field(grid: Grid1D, fn: Callable[[np.ndarray, float], np.ndarray],
                 t: float = 0.0) -> ScalarField:
    """Evaluate fn(x, t) on the grid nodes and wrap as a ScalarField."""
    return ScalarField(grid, np.asarray(fn(grid.nodes, t), dtype=float), time_label=t)


def integrate(f: ScalarField) -> float:
    """Trapezoid integral of f over its grid."""
    return float(f.grid.weights @ f.values)


def gradient_values(values: np.ndarray, spacing: float) -> np.ndarray:
    """Central-difference d/dx along the last axis, one-sided at the edges.

    Interior: (f[i+1] - f[i-1]) / 2h.  Edges use the second-order
    three-point one-sided formulas, so polynomials up to degree 2 are
    differentiated exactly everywhere.
    """
    v = np.asarray(values, dtype=float)
    g = np.empty_like(v)
    g[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * spacing)
    g[..., 0] = (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * spacing)
    g[..., -1] = (3.0 * v[..., -1] - 4.0 * v[..., -2] + v[..., -3]) / (2.0 * spacing)
    return g


def laplacian_values(values: np.ndarray, spacing: float) -> np.ndarray:
    """Three-point d2/dx2 along the last axis; edge rows copy their neighbor."""
    v = np.asarray(values, dtype=float)
    lap = np.empty_like(v)
    lap[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / spacing**2
    lap[..., 0] = lap[..., 1]
    lap[..., -1] = lap[..., -2]
    return lap


def gradient(f: ScalarField) -> ScalarField:
    return f.with_values(gradient_values(f.values, f.grid.spacing))


def laplacian(f: ScalarField) -> ScalarField:
    return f.with_values(laplacian_values(f.values, f.grid.spacing))


def normalize(f: ScalarField) -> ScalarField:
    """Scale f to unit trapezoid mass; reject non-positive or non-finite mass."""
    mass = integrate(f)
    if not np.isfinite(mass) or mass <= 0.0:
        raise NormalizationError(f"cannot normalize field with mass {mass}")
    return f.with_values(f.values / mass)


@dataclass(frozen=True)
class FieldStack:
    """Samples of a space-time field on a Grid1D x time-lattice product.

    values[k, i] is the field at (times[k], nodes[i]).  This is the common
    currency between the bridge solution, the residual engines and the SDE
    integrator.
    """

    grid: Grid1D
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a nonempty 1-D array")
        if np.any(np.diff(times) <= 0.0):
            raise NumericDomainError("times must be strictly increasing")
        if vals.shape != (times.size, self.grid.n_points):
            raise ValueError(
                f"values shape {vals.shape} does not match "
                f"({times.size}, {self.grid.n_points})")
        if not np.all(np.isfinite(vals)):
            raise NumericDomainError("stack values must be finite")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "values", _readonly(vals))

    @classmethod
    def sample(cls, grid: Grid1D, times: np.ndarray,
               fn: Callable[[np.ndarray, float], np.ndarray]) -> "FieldStack":
        times = np.asarray(times, dtype=float)
        vals = np.empty((times.size, grid.n_points))
        for k, t in enumerate(times):
            vals[k] = fn(grid.nodes, float(t))
        return cls(grid, times, vals)

    def slice_index(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol:
            raise ValueError(f"time {t} is not on the stack lattice")
        return k

    def slice(self, t: float) -> ScalarField:
        k = self.slice_index(t)
        return ScalarField(self.grid, self.values[k], time_label=float(self.times[k]))

    def at(self, positions: np.ndarray, t: float) -> np.ndarray:
        """Bilinear interpolation in (t, x); clamped outside the lattice."""
        x = np.asarray(positions, dtype=float)
        times = self.times
        if t <= times[0]:
            lo, hi, w = 0, 0, 0.0
        elif t >= times[-1]:
            lo, hi, w = times.size - 1, times.size - 1, 0.0
        else:
            hi = int(np.searchsorted(times, t))
            lo = hi - 1
            w = (t - times[lo]) / (times[hi] - times[lo])
        nodes = self.grid.nodes
        a = np.interp(x, nodes, self.values[lo])
        if hi == lo:
            return a
        b = np.interp(x, nodes, self.values[hi])
        return (1.0 - w) * a + w * b
