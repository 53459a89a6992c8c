"""
Incompressible Flow
Step-size control, buoyancy, explicit momentum advection, implicit viscosity
and Chorin projection on the staggered grid; full coupled step.
"""

import logging
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from core_types import Grid, ObrbError, Params, ScalarField, SimState, VectorField, make_potential
from elliptic import (MIN_RELATIVE_TOL, SolverError, face_dirichlet_energy, solve_helmholtz_velocity,
                      solve_poisson_neumann_zero_mean)
from heat import advective_dt, temperature_step
from nonlocal_bc import BoundaryClosure

logger = logging.getLogger(__name__)


class NonFiniteStateError(ObrbError):
    """Raised when NaN or Inf appears in the evolving state"""

    def __init__(self, array: str, t: float, step: int):
        self.array = array
        super().__init__(f"Non-finite values in {array} at t={t:.6g} (step {step})")


@lru_cache(maxsize=16)
def potential_for(grid: Grid, g_spec: str) -> ScalarField:
    """Cached gravitational potential for a grid and descriptor"""
    G = make_potential(grid, g_spec)
    G.values.setflags(write=False)
    return G


def compute_dt(state: SimState, params: Params) -> float:
    """Advective step size; never zero, dt_cfl * dt_max at rest"""
    return advective_dt(state.u, params.dt_cfl, params.dt_max)


# =============================================================================
# FORCES
# =============================================================================

def buoyancy_force(theta: ScalarField, G: ScalarField) -> VectorField:
    """
    Face-centered -Theta * grad G

    Theta is averaged to each interior face and grad G is the face
    difference; wall-normal faces carry no force.
    """
    grid = theta.grid
    t, g = theta.values, G.values
    fx = np.zeros((grid.nx + 1, grid.ny))
    fy = np.zeros((grid.nx, grid.ny + 1))
    fx[1:-1, :] = -0.5 * (t[1:, :] + t[:-1, :]) * (g[1:, :] - g[:-1, :]) / grid.hx
    fy[:, 1:-1] = -0.5 * (t[:, 1:] + t[:, :-1]) * (g[:, 1:] - g[:, :-1]) / grid.hy
    return VectorField(grid, fx, fy)


def momentum_advection(u: VectorField) -> Tuple[np.ndarray, np.ndarray]:
    """
    div(u (x) u) on interior faces in conservative staggered form

    Returns:
        (ax, ay) shaped like u.ux[1:-1, :] and u.uy[:, 1:-1]
    """
    grid = u.grid
    ux, uy = u.ux, u.uy
    hx, hy = grid.hx, grid.hy

    # cell-centered normal fluxes
    uc = 0.5 * (ux[:-1, :] + ux[1:, :])
    vc = 0.5 * (uy[:, :-1] + uy[:, 1:])
    fxx = uc * uc
    fyy = vc * vc

    # corner fluxes; both factors vanish on the walls
    u_node = np.zeros((grid.nx + 1, grid.ny + 1))
    v_node = np.zeros((grid.nx + 1, grid.ny + 1))
    u_node[:, 1:-1] = 0.5 * (ux[:, :-1] + ux[:, 1:])
    v_node[1:-1, :] = 0.5 * (uy[:-1, :] + uy[1:, :])
    fxy = u_node * v_node

    ax = (fxx[1:, :] - fxx[:-1, :]) / hx + (fxy[1:-1, 1:] - fxy[1:-1, :-1]) / hy
    ay = (fxy[1:, 1:-1] - fxy[:-1, 1:-1]) / hx + (fyy[:, 1:] - fyy[:, :-1]) / hy
    return ax, ay


def velocity_dirichlet_energy(u: VectorField) -> float:
    """||grad u||^2 with no-slip walls"""
    return (face_dirichlet_energy(u.ux[1:-1, :], u.grid, 'x')
            + face_dirichlet_energy(u.uy[:, 1:-1], u.grid, 'y'))


def buoyancy_work(theta: ScalarField, G: ScalarField, u: VectorField) -> float:
    """<-Theta grad G, u> over the faces"""
    force = buoyancy_force(theta, G)
    return float(np.sum(force.ux * u.ux) + np.sum(force.uy * u.uy)) * u.grid.cell_area


# =============================================================================
# STEPPING
# =============================================================================

def project(u: VectorField, dt: float, lin_tol: float) -> Tuple[VectorField, ScalarField]:
    """
    Remove the gradient part of u: solve lap phi = div(u)/dt with Neumann
    walls and return u - dt*grad(phi) together with phi

    Raises:
        SolverError: If the pressure solve does not converge
    """
    grid = u.grid
    div = u.divergence()
    size = float(np.linalg.norm(div))
    if size == 0.0:
        return u.copy(), ScalarField(grid, np.zeros(grid.shape))
    tol = max(min(lin_tol, lin_tol / size), MIN_RELATIVE_TOL)
    phi, report = solve_poisson_neumann_zero_mean(grid, ScalarField(grid, div / dt), tol)
    if not report.converged:
        raise SolverError(f"Pressure projection failed: residual {report.residual:.3e} "
                          f"after {report.iterations} iterations")
    p = phi.values
    ux = u.ux.copy()
    uy = u.uy.copy()
    ux[1:-1, :] -= dt * (p[1:, :] - p[:-1, :]) / grid.hx
    uy[:, 1:-1] -= dt * (p[:, 1:] - p[:, :-1]) / grid.hy
    return VectorField(grid, ux, uy), phi


def momentum_step(state: SimState, params: Params, dt: float,
                  potential: ScalarField) -> Tuple[VectorField, ScalarField]:
    """
    Advance the velocity by one step with the temperature held in state

    Order: explicit advection, implicit viscous solve with no-slip walls, the
    buoyancy increment, then projection. A buoyancy that is itself a discrete
    gradient is removed entirely by the projection.

    Args:
        state: Velocity u^n and the temperature driving the buoyancy
        params: Viscosity and tolerances
        dt: Step size from compute_dt
        potential: Gravitational potential G

    Returns:
        Tuple of (divergence-free velocity, pressure potential phi)

    Raises:
        SolverError: If a viscous or pressure solve does not converge
    """
    grid = state.grid
    u = state.u
    ax, ay = momentum_advection(u)
    c = params.mu * dt

    wx, rx = solve_helmholtz_velocity(grid, c, u.ux[1:-1, :] - dt * ax, 'x', params.lin_tol)
    wy, ry = solve_helmholtz_velocity(grid, c, u.uy[:, 1:-1] - dt * ay, 'y', params.lin_tol)
    for name, report in (('ux', rx), ('uy', ry)):
        if not report.converged:
            raise SolverError(f"Viscous solve for {name} failed: residual {report.residual:.3e}")

    force = buoyancy_force(state.theta, potential)
    ux = np.zeros_like(u.ux)
    uy = np.zeros_like(u.uy)
    ux[1:-1, :] = wx + dt * force.ux[1:-1, :]
    uy[:, 1:-1] = wy + dt * force.uy[:, 1:-1]
    return project(VectorField(grid, ux, uy), dt, params.lin_tol)


def check_finite(state: SimState):
    """
    Raises:
        NonFiniteStateError: Naming the first array holding NaN or Inf
    """
    for name, values in (('theta', state.theta.values), ('ux', state.u.ux), ('uy', state.u.uy)):
        if not np.all(np.isfinite(values)):
            raise NonFiniteStateError(name, state.t, state.step)


def full_step(state: SimState, closure: BoundaryClosure, params: Params,
              potential: Optional[ScalarField] = None, dt: Optional[float] = None) -> SimState:
    """
    Advance (u, Theta, t) by one step

    The temperature moves first with u^n, then the momentum step uses the new
    temperature in the buoyancy.

    Args:
        state: Current state
        closure: Boundary data and alpha
        params: Physical constants and numerical controls
        potential: G; built from params.g_spec when omitted
        dt: Step size; compute_dt(state, params) when omitted

    Returns:
        New SimState with t, step and pressure updated

    Raises:
        NonFiniteStateError: If any array becomes non-finite
        SolverError: If a solve fails or the divergence bound is exceeded
        CFLViolationError: If an explicit dt breaks the advective limit
    """
    if potential is None:
        potential = potential_for(state.grid, params.g_spec)
    if dt is None:
        dt = compute_dt(state, params)

    theta = temperature_step(state, closure, params, dt)
    intermediate = SimState(state.t, state.u, theta, state.step)
    check_finite(intermediate)
    u, phi = momentum_step(intermediate, params, dt, potential)
    new_state = SimState(state.t + dt, u, theta, state.step + 1, phi)
    check_finite(new_state)

    div_max = new_state.divergence_max()
    if div_max > 10.0 * params.lin_tol:
        raise SolverError(f"Divergence {div_max:.3e} exceeds {10.0 * params.lin_tol:.1e} "
                          f"after step {new_state.step}")
    logger.debug(f"Step {new_state.step}: t={new_state.t:.6g}, dt={dt:.3e}, div={div_max:.2e}")
    return new_state


# =============================================================================
# INITIAL VELOCITIES
# =============================================================================

def velocity_from_streamfunction(grid: Grid, psi: np.ndarray) -> VectorField:
    """ux = d(psi)/dy, uy = -d(psi)/dx from nodal psi; exactly divergence-free"""
    ux = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    uy = -(psi[1:, :] - psi[:-1, :]) / grid.hx
    return VectorField(grid, ux, uy)


def _normalized(u: VectorField, amplitude: float) -> VectorField:
    peak = max(u.max_abs())
    if peak == 0.0 or amplitude == 0.0:
        return VectorField.zeros(u.grid)
    scale = amplitude / peak
    return VectorField(u.grid, u.ux * scale, u.uy * scale)


def random_divfree_velocity(grid: Grid, amplitude: float, rng: np.random.Generator,
                            modes: int = 4) -> VectorField:
    """
    Curl of a seeded random smooth streamfunction vanishing to second order at the walls

    Args:
        amplitude: Peak face velocity of the result
        rng: numpy Generator supplying the mode coefficients
        modes: Number of sine modes per axis
    """
    X, Y = grid.nodes()
    sx, sy = np.pi * X / grid.lx, np.pi * Y / grid.ly
    coeffs = rng.standard_normal((modes, modes))
    psi = np.zeros_like(X)
    for k in range(1, modes + 1):
        for l in range(1, modes + 1):
            psi += coeffs[k - 1, l - 1] / (k * k + l * l) * np.sin(k * sx) * np.sin(l * sy)
    psi *= np.sin(sx) * np.sin(sy)
    return _normalized(velocity_from_streamfunction(grid, psi), amplitude)


def eigenmode_velocity(grid: Grid, amplitude: float) -> VectorField:
    """Single swirl from psi = sin^2(pi x/lx) sin^2(pi y/ly)"""
    X, Y = grid.nodes()
    psi = (np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)) ** 2
    return _normalized(velocity_from_streamfunction(grid, psi), amplitude)
