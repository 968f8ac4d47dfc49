"""Boundary-data factorization: IPF solve, factor propagation, transitions.

The boundary problem asks for positive factors (u0, vT) such that the
product measure u0(y) k(y, 0, x, T) vT(x) has the prescribed densities
as its two marginals.  ``solve_boundary_system`` finds the factor pair
by iterative proportional fitting; ``propagate_factors`` carries the
pair across a time lattice, giving interpolating densities and the two
drifts; the transition constructors tilt the reference kernel by the
propagated factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (ConvergenceError, IncompatibilityError, NormalizationError,
                     PositivityError, PropagationError)
from .grids import FieldStack, Grid1D, ScalarField, gradient_values, integrate
from .kernels import Kernel, KernelMatrix

FACTOR_CLIP = 1e-300
MASS_TOL = 1e-8
DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class BoundaryData:
    """Prescribed start/end densities on a common grid."""

    rho0: ScalarField
    rhoT: ScalarField
    horizon: float

    def __post_init__(self):
        if self.rho0.grid != self.rhoT.grid:
            raise ValueError("boundary densities must share a grid")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        for name, f in (("rho0", self.rho0), ("rhoT", self.rhoT)):
            if np.min(f.values) <= 0.0:
                raise PositivityError(f"{name} must be strictly positive")
            mass = integrate(f)
            if abs(mass - 1.0) > MASS_TOL:
                raise NormalizationError(
                    f"{name} mass {mass!r} deviates from 1 beyond {MASS_TOL}")

    @property
    def grid(self) -> Grid1D:
        return self.rho0.grid


@dataclass(frozen=True)
class BridgeFactors:
    """Positive factor pair; gauge records the scalar removed from u0."""

    u0: ScalarField
    vT: ScalarField
    gauge: float


def marginal_l1_residual(matrix: KernelMatrix, u: np.ndarray, v: np.ndarray,
                         boundary: BoundaryData) -> float:
    """L1 defect of both marginals for a candidate factor pair."""
    w = matrix.source.weights
    left = u * matrix.apply_target(v) - boundary.rho0.values
    right = v * matrix.apply_source(u) - boundary.rhoT.values
    return float(w @ np.abs(left) + matrix.target.weights @ np.abs(right))


def solve_boundary_system(matrix: KernelMatrix, boundary: BoundaryData,
                          tol: float = 1e-12, max_iter: int = 500,
                          callback: Callable[[int, float, float], None] | None = None,
                          ) -> BridgeFactors:
    """Iterative proportional fitting for the boundary factor pair.

    Alternates u = rho0 / K v and v = rhoT / K^T u (quadrature-weighted
    kernel applications) until the successive L1 change of the pair drops
    below ``tol``.  The returned pair is gauge-fixed so u0 has unit
    integral; ``gauge`` is the scalar that was divided out.

    ``callback(iteration, l1_change, marginal_residual)``, when given, is
    invoked once per sweep; the residual sequence is non-increasing.
    """
    if matrix.source.n_points != boundary.grid.n_points:
        raise ValueError("kernel matrix and boundary data use different grids")
    rho0 = boundary.rho0.values
    rhoT = boundary.rhoT.values
    w0 = matrix.source.weights
    wT = matrix.target.weights

    v = rhoT.copy()
    u_prev: np.ndarray | None = None
    change = float("inf")
    residual = float("inf")
    for sweep in range(1, max_iter + 1):
        kv = matrix.apply_target(v)
        if np.min(kv) <= 0.0 or not np.all(np.isfinite(kv)):
            raise IncompatibilityError(
                "kernel maps the end factor to a non-positive intermediate")
        u = rho0 / np.maximum(kv, FACTOR_CLIP)
        ktu = matrix.apply_source(u)
        if np.min(ktu) <= 0.0 or not np.all(np.isfinite(ktu)):
            raise IncompatibilityError(
                "kernel maps the start factor to a non-positive intermediate")
        v_new = rhoT / np.maximum(ktu, FACTOR_CLIP)

        change = float(wT @ np.abs(v_new - v))
        if u_prev is not None:
            change += float(w0 @ np.abs(u - u_prev))
        residual = marginal_l1_residual(matrix, u, v_new, boundary)
        if callback is not None:
            callback(sweep, change, residual)
        v = v_new
        u_prev = u
        if change < tol:
            gauge = float(w0 @ u)
            return BridgeFactors(
                u0=ScalarField(matrix.source, u / gauge, time_label=0.0),
                vT=ScalarField(matrix.target, v * gauge,
                               time_label=boundary.horizon),
                gauge=gauge)
    raise ConvergenceError(
        f"IPF did not reach tol={tol} within {max_iter} sweeps "
        f"(last change {change:.3e})", last_change=change, last_residual=residual)


def _log_gradient_drift(values: np.ndarray, spacing: float, nu: float,
                        sign: float) -> np.ndarray:
    # 2*nu*grad(ln f): exact for log-quadratic factors under central stencils
    return sign * 2.0 * nu * gradient_values(
        np.log(np.maximum(values, FACTOR_CLIP)), spacing)


@dataclass(frozen=True)
class BridgeSolution:
    """Factor pair carried over a time lattice, with density and drifts.

    rho[k] = u[k] * v[k] row by row; b = 2*nu*grad(ln v) and
    b_star = -2*nu*grad(ln u) are the forward and backward drifts.
    """

    grid: Grid1D
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    rho: np.ndarray
    b: np.ndarray
    b_star: np.ndarray
    nu: float
    masses: np.ndarray

    @classmethod
    def from_factor_stacks(cls, grid: Grid1D, times: np.ndarray, u: np.ndarray,
                           v: np.ndarray, nu: float,
                           mass_tol: float = 1e-4) -> "BridgeSolution":
        times = np.asarray(times, dtype=float)
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.min(u) < 0.0 or np.min(v) < 0.0:
            raise PositivityError("bridge factors must be nonnegative")
        rho = u * v
        masses = rho @ grid.weights
        drift = float(np.max(np.abs(masses - 1.0)))
        if drift > mass_tol:
            raise PropagationError(
                f"interpolating density mass drifts by {drift:.3e} (> {mass_tol})")
        h = grid.spacing
        return cls(grid=grid, times=times, u=u, v=v, rho=rho,
                   b=_log_gradient_drift(v, h, nu, +1.0),
                   b_star=_log_gradient_drift(u, h, nu, -1.0),
                   nu=float(nu), masses=masses)

    def slice_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9:
            raise ValueError(f"time {t} is not on the solution lattice")
        return k

    @cached_property
    def rho_stack(self) -> FieldStack:
        return FieldStack(self.grid, self.times, self.rho)

    @cached_property
    def forward_drift_stack(self) -> FieldStack:
        return FieldStack(self.grid, self.times, self.b)

    @cached_property
    def backward_drift_stack(self) -> FieldStack:
        return FieldStack(self.grid, self.times, self.b_star)

    def density_mask(self, floor: float = DENSITY_FLOOR) -> np.ndarray:
        """Boolean [n_times, n_points] mask where rho >= floor."""
        return self.rho >= floor


def propagate_factors(factors: BridgeFactors, kernel: Kernel,
                      times: np.ndarray | None = None, nu: float | None = None,
                      mass_tol: float = 1e-4) -> BridgeSolution:
    """Carry the factor pair across a time lattice via the reference kernel.

    u(., t) integrates u0 against the kernel from time 0; v(., s)
    integrates vT against the kernel toward the horizon.  The lattice
    must start at 0 and end at the horizon (101 uniform slices when not
    given).  Mass drift of rho = u*v beyond ``mass_tol`` raises.
    """
    grid = factors.u0.grid
    horizon = factors.vT.time_label
    if times is None:
        times = np.linspace(0.0, horizon, 101)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing with >= 2 entries")
    if abs(times[0]) > 1e-12 or abs(times[-1] - horizon) > 1e-12:
        raise ValueError(f"times must run from 0 to the horizon {horizon}")
    if nu is None:
        nu = getattr(kernel, "nu", 1.0)

    n_t = times.size
    u = np.empty((n_t, grid.n_points))
    v = np.empty((n_t, grid.n_points))
    u[0] = factors.u0.values
    v[-1] = factors.vT.values
    for k in range(1, n_t):
        mat = KernelMatrix.from_kernel(kernel, grid, float(times[0]),
                                       float(times[k]))
        u[k] = mat.apply_source(factors.u0.values)
    for k in range(n_t - 1):
        mat = KernelMatrix.from_kernel(kernel, grid, float(times[k]),
                                       float(times[-1]))
        v[k] = mat.apply_target(factors.vT.values)
    return BridgeSolution.from_factor_stacks(grid, times, u, v, nu,
                                             mass_tol=mass_tol)


def _interp_row(grid: Grid1D, row: np.ndarray, points) -> np.ndarray:
    return np.interp(np.asarray(points, dtype=float), grid.nodes, row)


def forward_transition(solution: BridgeSolution, kernel: Kernel, y, s: float,
                       x, t: float) -> np.ndarray:
    """Forward transition density k(y,s,x,t) * v(x,t) / v(y,s).

    s and t must lie on the solution lattice; y and x may be off-node
    (factors are interpolated linearly).  The denominator is clipped at
    the factor floor.
    """
    ks, kt = solution.slice_index(s), solution.slice_index(t)
    v_y = _interp_row(solution.grid, solution.v[ks], y)
    v_x = _interp_row(solution.grid, solution.v[kt], x)
    k_val = kernel.evaluate(y, s, x, t)
    return k_val * v_x / np.maximum(v_y, FACTOR_CLIP)


def backward_transition(solution: BridgeSolution, kernel: Kernel, y, s: float,
                        x, t: float) -> np.ndarray:
    """Backward transition density k(y,s,x,t) * u(y,s) / u(x,t).

    Integrates to one over y for each fixed (x, t) and satisfies the
    reversal identity rho(y,s) p(y,s,x,t) = p*(y,s,x,t) rho(x,t).
    """
    ks, kt = solution.slice_index(s), solution.slice_index(t)
    u_y = _interp_row(solution.grid, solution.u[ks], y)
    u_x = _interp_row(solution.grid, solution.u[kt], x)
    k_val = kernel.evaluate(y, s, x, t)
    return k_val * u_y / np.maximum(u_x, FACTOR_CLIP)


def gauge_align(candidate: np.ndarray, reference: np.ndarray,
                weights: np.ndarray) -> float:
    """Least-squares scalar lam minimizing ||lam*candidate - reference||_w."""
    candidate = np.asarray(candidate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    denom = float(weights @ (candidate * candidate))
    if denom <= 0.0:
        raise ValueError("cannot align a zero candidate")
    return float(weights @ (candidate * reference)) / denom
