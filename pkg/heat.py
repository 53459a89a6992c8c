"""
Temperature Transport
Upwind finite-volume advection, implicit diffusion with the non-local
boundary coupling, and the frozen-velocity contraction experiment.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core_types import EdgeTraces, Grid, ObrbError, Params, ScalarField, SimState, VectorField
from elliptic import (SolverError, poincare_constant, solve_helmholtz_dirichlet,
                      solve_helmholtz_rank_one)
from nonlocal_bc import BoundaryClosure, boundary_value

logger = logging.getLogger(__name__)

# Roundoff allowance on the cell-wise Courant number
CFL_SLACK = 1e-12


class CFLViolationError(ObrbError):
    """Raised when a time step exceeds the advective CFL limit"""

    def __init__(self, courant: float, cell: Tuple[int, int], dt: float):
        self.courant = courant
        self.cell = cell
        self.dt = dt
        super().__init__(f"CFL violated: Courant number {courant:.4f} > 1 in cell {cell} (dt={dt:.3e})")


# =============================================================================
# STEP SIZE
# =============================================================================

def advective_dt(u: VectorField, dt_cfl: float, dt_max: float) -> float:
    """
    dt = dt_cfl * min(1 / (max|ux|/hx + max|uy|/hy), dt_max)

    Falls back to dt_cfl * dt_max for a fluid at rest.
    """
    grid = u.grid
    ux_max, uy_max = u.max_abs()
    rate = ux_max / grid.hx + uy_max / grid.hy
    if rate == 0.0:
        return dt_cfl * dt_max
    return dt_cfl * min(1.0 / rate, dt_max)


def courant_numbers(u: VectorField, dt: float) -> np.ndarray:
    """Cell-wise dt * (max face |ux| / hx + max face |uy| / hy)"""
    grid = u.grid
    ax = np.maximum(np.abs(u.ux[:-1, :]), np.abs(u.ux[1:, :])) / grid.hx
    ay = np.maximum(np.abs(u.uy[:, :-1]), np.abs(u.uy[:, 1:])) / grid.hy
    return dt * (ax + ay)


def check_cfl(u: VectorField, dt: float):
    """
    Raises:
        CFLViolationError: Naming the worst cell when a Courant number exceeds 1
    """
    courant = courant_numbers(u, dt)
    worst = np.unravel_index(int(np.argmax(courant)), courant.shape)
    if courant[worst] > 1.0 + CFL_SLACK:
        raise CFLViolationError(float(courant[worst]), (int(worst[0]), int(worst[1])), dt)


# =============================================================================
# ADVECTION
# =============================================================================

def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_states(v: np.ndarray, axis: int, limited: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Values seen from the low and high side of every interior face along axis"""
    lo = np.take(v, np.arange(v.shape[axis] - 1), axis=axis)
    hi = np.take(v, np.arange(1, v.shape[axis]), axis=axis)
    if not limited:
        return lo, hi
    delta = np.diff(v, axis=axis)
    slope = np.zeros_like(v)
    inner = [slice(None)] * 2
    inner[axis] = slice(1, -1)
    left = [slice(None)] * 2
    left[axis] = slice(None, -1)
    right = [slice(None)] * 2
    right[axis] = slice(1, None)
    slope[tuple(inner)] = _minmod(delta[tuple(left)], delta[tuple(right)])
    lo = lo + 0.5 * np.take(slope, np.arange(v.shape[axis] - 1), axis=axis)
    hi = hi - 0.5 * np.take(slope, np.arange(1, v.shape[axis]), axis=axis)
    return lo, hi


def advect_temperature(theta: ScalarField, u: VectorField, dt: float,
                       inflow: Optional[EdgeTraces] = None, limited: bool = False) -> ScalarField:
    """
    Explicit finite-volume transport of theta by u over dt

    Args:
        theta: Cell-centered temperature
        u: Discretely divergence-free velocity
        dt: Step size within the advective CFL limit
        inflow: Wall values used where fluid enters through a boundary face;
            defaults to theta's own trace
        limited: Use minmod-limited MUSCL reconstruction instead of first-order upwind

    Returns:
        Transported field (trace carried over from theta)

    Raises:
        CFLViolationError: If dt exceeds the cell-wise CFL limit
    """
    check_cfl(u, dt)
    grid = theta.grid
    v = theta.values
    if inflow is None:
        inflow = theta.trace if theta.trace is not None else EdgeTraces(v[0, :], v[-1, :], v[:, 0], v[:, -1])

    fx = np.zeros((grid.nx + 1, grid.ny))
    lo, hi = _face_states(v, 0, limited)
    ux = u.ux[1:-1, :]
    fx[1:-1, :] = np.where(ux > 0.0, ux * lo, ux * hi)
    fx[0, :] = np.where(u.ux[0, :] > 0.0, u.ux[0, :] * inflow.west, u.ux[0, :] * v[0, :])
    fx[-1, :] = np.where(u.ux[-1, :] < 0.0, u.ux[-1, :] * inflow.east, u.ux[-1, :] * v[-1, :])

    fy = np.zeros((grid.nx, grid.ny + 1))
    lo, hi = _face_states(v, 1, limited)
    uy = u.uy[:, 1:-1]
    fy[:, 1:-1] = np.where(uy > 0.0, uy * lo, uy * hi)
    fy[:, 0] = np.where(u.uy[:, 0] > 0.0, u.uy[:, 0] * inflow.south, u.uy[:, 0] * v[:, 0])
    fy[:, -1] = np.where(u.uy[:, -1] < 0.0, u.uy[:, -1] * inflow.north, u.uy[:, -1] * v[:, -1])

    update = v - dt * ((fx[1:, :] - fx[:-1, :]) / grid.hx + (fy[:, 1:] - fy[:, :-1]) / grid.hy)
    return ScalarField(grid, update, theta.trace)


# =============================================================================
# DIFFUSION
# =============================================================================

def diffuse_temperature(theta_star: ScalarField, closure: BoundaryClosure, kappa: float, dt: float,
                        tol: float, coupling: str = 'implicit',
                        theta_prev: Optional[ScalarField] = None) -> ScalarField:
    """
    Implicit diffusion (Id - kappa*dt*lap_h) Theta = theta_star with the
    non-local wall value

    Args:
        coupling: 'implicit' solves the mean coupling exactly; 'lagged' uses
            thetaB - alpha * mean(theta_prev) as a fixed Dirichlet value
        theta_prev: Field supplying the lagged mean (defaults to theta_star)

    Raises:
        SolverError: If the linear solve does not converge
    """
    if not (kappa > 0 and dt > 0):
        raise ValueError(f"kappa and dt must be positive, got kappa={kappa}, dt={dt}")
    c = kappa * dt
    grid = theta_star.grid
    if coupling == 'implicit':
        result, report = solve_helmholtz_rank_one(grid, c, theta_star, closure.trace, closure.alpha, tol)
    elif coupling == 'lagged':
        source = theta_prev if theta_prev is not None else theta_star
        result, report = solve_helmholtz_dirichlet(grid, c, theta_star, boundary_value(source, closure), tol)
    else:
        raise ValueError(f"Unknown boundary coupling: {coupling}")
    if not report.converged:
        raise SolverError(f"Temperature diffusion solve failed: residual {report.residual:.3e} "
                          f"after {report.iterations} iterations")
    return result


def temperature_step(state: SimState, closure: BoundaryClosure, params: Params, dt: float) -> ScalarField:
    """
    Advect with the current velocity, then diffuse implicitly

    Args:
        state: Current (u, theta)
        closure: Boundary data and alpha
        params: Diffusivity, tolerances, scheme options
        dt: Step size from flow.compute_dt

    Returns:
        Temperature at the next time level
    """
    inflow = boundary_value(state.theta, closure)
    theta_star = advect_temperature(state.theta, state.u, dt, inflow,
                                    limited=params.advection == 'limited')
    return diffuse_temperature(theta_star, closure, params.kappa, dt, params.lin_tol,
                               params.bc_coupling, theta_prev=state.theta)


def envelope(theta_old: ScalarField, new_trace: EdgeTraces) -> Tuple[float, float]:
    """Extrema over the old interior values and the new wall trace"""
    lower = min(float(np.min(theta_old.values)), new_trace.min())
    upper = max(float(np.max(theta_old.values)), new_trace.max())
    return lower, upper


def max_principle_excess(theta_old: ScalarField, theta_new: ScalarField) -> float:
    """
    Amount by which theta_new leaves the envelope of theta_old and its own
    wall trace; zero when the discrete maximum principle holds
    """
    trace = theta_new.trace if theta_new.trace is not None else EdgeTraces.constant(theta_new.grid, 0.0)
    lower, upper = envelope(theta_old, trace)
    excess = max(float(np.max(theta_new.values)) - upper, lower - float(np.min(theta_new.values)), 0.0)
    if excess > 0.0:
        logger.debug(f"Temperature left its envelope [{lower:.6g}, {upper:.6g}] by {excess:.3e}")
    return excess


# =============================================================================
# FROZEN-VELOCITY CONTRACTION
# =============================================================================

@dataclass
class ContractionReport:
    """Decay of the weighted energy of the difference of two temperature evolutions"""

    times: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    dt: float = 0.0
    rate_bound: float = 0.0
    slack: float = 0.0
    monotone: bool = True
    max_increase: float = 0.0

    @property
    def slack_ok(self) -> bool:
        return self.slack <= 0.1

    def to_dict(self) -> Dict:
        return asdict(self)


def difference_energy(d: np.ndarray, grid: Grid, alpha: float) -> float:
    """E = 1/2 <D, Lambda^-1 D> = 1/2 (||D||^2 + alpha |Omega| mean(D)^2)"""
    m = float(np.mean(d))
    return 0.5 * (float(np.sum(d * d)) * grid.cell_area + alpha * grid.area * m * m)


def _velocity_at(u_series, step: int, grid: Grid) -> VectorField:
    if u_series is None:
        return VectorField.zeros(grid)
    if isinstance(u_series, VectorField):
        return u_series
    return u_series[min(step, len(u_series) - 1)]


def frozen_velocity_contraction(theta1_0: ScalarField, theta2_0: ScalarField,
                                u_series: Union[VectorField, Sequence[VectorField], None],
                                closure: BoundaryClosure, params: Params, T: float) -> ContractionReport:
    """
    Evolve two temperatures with the same velocity and track the energy of
    their difference

    The energy is E = 1/2 <D, Lambda^-1 D> with D = theta1 - theta2, i.e. the
    weighted energy of the transformed difference, which vanishes on the walls.

    Args:
        theta1_0, theta2_0: Initial temperatures
        u_series: One frozen velocity, a per-step sequence (last entry repeats), or None for rest
        closure: Boundary data and alpha
        params: Diffusivity and numerical controls
        T: Final time

    Returns:
        ContractionReport with the energy history, the theoretical rate
        2*kappa*C_p^2 and the measured slack against it
    """
    grid = theta1_0.grid
    cp = poincare_constant(grid)
    rate = 2.0 * params.kappa * cp ** 2

    u0 = _velocity_at(u_series, 0, grid)
    dt = min(advective_dt(u0, params.dt_cfl, params.dt_max), 0.05 / (params.kappa * cp ** 2))
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / steps

    report = ContractionReport(dt=dt, rate_bound=rate)
    theta1, theta2 = theta1_0.copy(), theta2_0.copy()
    e0 = difference_energy(theta1.values - theta2.values, grid, closure.alpha)
    report.times.append(0.0)
    report.energies.append(e0)
    allowance = 1e-12 * max(1.0, e0)

    for n in range(steps):
        u = _velocity_at(u_series, n, grid)
        theta1 = temperature_step(SimState(n * dt, u, theta1, n), closure, params, dt)
        theta2 = temperature_step(SimState(n * dt, u, theta2, n), closure, params, dt)
        energy = difference_energy(theta1.values - theta2.values, grid, closure.alpha)
        increase = energy - report.energies[-1]
        if increase > allowance:
            report.monotone = False
            logger.warning(f"Contraction energy grew by {increase:.3e} at t={(n + 1) * dt:.4f}")
        report.max_increase = max(report.max_increase, increase)
        report.times.append((n + 1) * dt)
        report.energies.append(energy)

    if e0 > 0.0:
        worst = 0.0
        for t, e in zip(report.times[1:], report.energies[1:]):
            if e <= 1e-300:
                break
            worst = max(worst, 1.0 - math.log(e0 / e) / (rate * t))
        report.slack = worst
    logger.info(f"Contraction over T={T:g}: E {e0:.3e} -> {report.energies[-1]:.3e}, "
                f"monotone={report.monotone}, slack={report.slack:.4f}")
    return report
