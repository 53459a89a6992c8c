"""
Equilibria and Stability
Stationary states: the closed form for aligned data, pseudo-time marching
for everything else, and the computable stability conditions.
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Dict, Optional

import numpy as np

from core_types import EdgeTraces, ObrbError, Params, ScalarField, SimState, VectorField, cell_gradient, \
    gradient_sup_norm
from elliptic import apply_laplacian, poincare_constant
from flow import full_step, potential_for
from nonlocal_bc import BoundaryClosure, to_calT

logger = logging.getLogger(__name__)


class NotAlignedError(ObrbError, ValueError):
    """Raised when the closed-form equilibrium is requested for non-aligned data"""
    pass


class SteadyStateError(ObrbError):
    """Raised when pseudo-time marching does not settle"""

    def __init__(self, residual: float, t: float):
        self.residual = residual
        self.t = t
        super().__init__(f"No steady state by t={t:.4g}: last change rate {residual:.3e}")


@dataclass
class EquilibriumSolution:
    """Stationary velocity and temperature with the transformed temperature"""

    us: VectorField
    thetas: ScalarField
    calTs: ScalarField
    residual: float

    def state(self, t: float = 0.0) -> SimState:
        return SimState(t, self.us.copy(), self.thetas.copy())


@dataclass
class StabilityReport:
    """Verdict of the aligned-gradient condition and its quadratic-form variant"""

    cp: float
    lhs: float
    rhs: float
    aligned: bool
    satisfied: bool
    optimal_Z: Optional[float]
    margin: float
    grad_G: float
    grad_thetaB: float
    quadratic_min: float
    quadratic_threshold: float

    def to_dict(self) -> Dict:
        return asdict(self)


def alignment_defect(closure: BoundaryClosure, potential: ScalarField) -> float:
    """Largest |grad thetaB x grad G| over the cells"""
    bx, by = cell_gradient(closure.thetaB)
    gx, gy = cell_gradient(potential)
    return float(np.max(np.abs(bx * gy - by * gx)))


def is_aligned(closure: BoundaryClosure, potential: ScalarField) -> bool:
    scale = max(1.0, gradient_sup_norm(closure.thetaB) * gradient_sup_norm(potential))
    return alignment_defect(closure, potential) <= 1e-8 * scale


def aligned_equilibrium(grid, closure: BoundaryClosure, alpha: Optional[float] = None,
                        potential: Optional[ScalarField] = None) -> EquilibriumSolution:
    """
    Closed-form rest state for boundary data aligned with gravity

    u_s = 0 and Theta_s = thetaB - alpha*m/(1+alpha) with m the mean of the
    harmonic extension, the fixed point of c = m - alpha*c.

    Args:
        grid: Grid of the closure
        closure: Boundary data (harmonic extension)
        alpha: Coupling coefficient; closure.alpha when omitted
        potential: G for the alignment test; linear_y(-1) when omitted

    Raises:
        NotAlignedError: If grad thetaB x grad G does not vanish
    """
    if alpha is None:
        alpha = closure.alpha
    if potential is None:
        potential = potential_for(grid, 'linear_y(-1)')
    if not is_aligned(closure, potential):
        raise NotAlignedError(f"Boundary data is not aligned with gravity "
                              f"(defect {alignment_defect(closure, potential):.3e}); use steady_solve")
    ext = closure.thetaB
    shift = -alpha * ext.mean() / (1.0 + alpha)
    thetas = ScalarField(grid, ext.values + shift, ext.trace.shifted(shift))
    residual = float(np.max(np.abs(apply_laplacian(thetas))))
    calTs = to_calT(thetas, closure if alpha == closure.alpha else closure.with_alpha(alpha))
    logger.info(f"Aligned equilibrium: mean(Theta_s)={thetas.mean():.10g}, residual {residual:.2e}")
    return EquilibriumSolution(VectorField.zeros(grid), thetas, calTs, residual)


def steady_solve(closure: BoundaryClosure, params: Params, init: SimState, tol_steady: float,
                 max_T: float, potential: Optional[ScalarField] = None) -> EquilibriumSolution:
    """
    March full steps until the state change per unit time drops below tol_steady

    The change ||dTheta|| + ||du|| is measured over successive windows of one
    time unit. Convergence does not imply uniqueness.

    Raises:
        SteadyStateError: If max_T is reached first, carrying the last change rate
    """
    if tol_steady <= 0:
        raise ValueError(f"tol_steady must be positive, got {tol_steady}")
    if potential is None:
        potential = potential_for(init.grid, params.g_spec)

    state = init.copy()
    mark = state.copy()
    residual = math.inf
    while state.t - init.t < max_T:
        previous = state
        state = full_step(state, closure, params, potential)
        if state.step == init.step + 1 and _change(state, previous) == 0.0:
            residual = 0.0
            break
        elapsed = state.t - mark.t
        if elapsed >= 1.0:
            residual = _change(state, mark) / elapsed
            logger.debug(f"Pseudo-time t={state.t:.3f}: change rate {residual:.3e}")
            if residual < tol_steady:
                break
            mark = state.copy()
    else:
        raise SteadyStateError(residual, state.t)

    calTs = to_calT(state.theta, closure)
    logger.info(f"Steady state after t={state.t - init.t:.3f} ({state.step - init.step} steps), "
                f"change rate {residual:.3e}")
    return EquilibriumSolution(state.u, state.theta, calTs, residual)


def _change(a: SimState, b: SimState) -> float:
    return (ScalarField(a.grid, a.theta.values - b.theta.values).l2_norm()
            + (a.u - b.u).l2_norm())


# =============================================================================
# STABILITY CONDITIONS
# =============================================================================

def stability_check(grid, closure: BoundaryClosure, G: ScalarField, params: Params) -> StabilityReport:
    """
    Evaluate ||grad G|| ||grad thetaB|| <= C_p^2 mu kappa

    Sup-norms are grid maxima of the cell gradients of the stored fields.
    """
    cp = poincare_constant(grid)
    grad_G = gradient_sup_norm(G)
    grad_B = gradient_sup_norm(closure.thetaB)
    lhs = grad_G * grad_B
    rhs = cp * cp * params.mu * params.kappa
    optimal_Z = math.sqrt(grad_B / grad_G) if grad_G > 0 and grad_B > 0 else None
    report = StabilityReport(
        cp=cp,
        lhs=lhs,
        rhs=rhs,
        aligned=is_aligned(closure, G),
        satisfied=lhs <= rhs,
        optimal_Z=optimal_Z,
        margin=rhs - lhs,
        grad_G=grad_G,
        grad_thetaB=grad_B,
        quadratic_min=2.0 * math.sqrt(grad_G * grad_B),
        quadratic_threshold=2.0 * cp * cp * math.sqrt(params.mu * params.kappa),
    )
    logger.info(f"Stability: lhs={lhs:.6g}, rhs={rhs:.6g}, aligned={report.aligned}, "
                f"satisfied={report.satisfied}")
    return report


def velocity_gradient_sup(u: VectorField) -> float:
    """Grid maximum of the Frobenius norm of grad u at cell centers (no-slip ghosts)"""
    grid = u.grid
    ux, uy = u.ux, u.uy
    dudx = (ux[1:, :] - ux[:-1, :]) / grid.hx
    dvdy = (uy[:, 1:] - uy[:, :-1]) / grid.hy

    # tangential derivatives live on corners; walls see the reflected ghost
    dudy = np.zeros((grid.nx + 1, grid.ny + 1))
    dudy[:, 1:-1] = (ux[:, 1:] - ux[:, :-1]) / grid.hy
    dudy[:, 0] = 2.0 * ux[:, 0] / grid.hy
    dudy[:, -1] = -2.0 * ux[:, -1] / grid.hy
    dvdx = np.zeros((grid.nx + 1, grid.ny + 1))
    dvdx[1:-1, :] = (uy[1:, :] - uy[:-1, :]) / grid.hx
    dvdx[0, :] = 2.0 * uy[0, :] / grid.hx
    dvdx[-1, :] = -2.0 * uy[-1, :] / grid.hx

    def to_centers(a):
        return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])

    norm = np.sqrt(dudx ** 2 + dvdy ** 2 + to_centers(dudy) ** 2 + to_centers(dvdx) ** 2)
    return float(np.max(norm))


def smallness_margin(eq: EquilibriumSolution, closure: BoundaryClosure, G: ScalarField,
                     params: Params) -> float:
    """
    Coefficient gap of the summed relative-energy inequality

    With P = ||grad G|| + ||grad(thetaB + calTs)|| and gU = ||grad u_s||, the
    velocity and thermal gaps mu C_p^2 - gU - P w/2 and kappa C_p^2 - P/(2w)
    are balanced by the weight w; the returned value is their common minimum.
    A positive margin certifies exponential decay of the relative energy at
    rate at least 2 * margin.
    """
    cp2 = poincare_constant(eq.thetas.grid) ** 2
    grad_G = gradient_sup_norm(G)
    total = ScalarField(closure.grid, closure.thetaB.values + eq.calTs.values,
                        EdgeTraces(*(a + b for a, b in zip(closure.trace.edges().values(),
                                                           eq.calTs.trace.edges().values())))
                        if eq.calTs.trace is not None else closure.trace)
    grad_T = gradient_sup_norm(total)
    grad_u = velocity_gradient_sup(eq.us)

    velocity_gap = params.mu * cp2 - grad_u
    thermal_gap = params.kappa * cp2
    coupling = grad_G + grad_T
    if coupling == 0.0:
        return min(velocity_gap, thermal_gap)
    d = velocity_gap - thermal_gap
    weight = (d + math.sqrt(d * d + coupling * coupling)) / coupling
    return velocity_gap - 0.5 * coupling * weight


def certified_decay_rate(margin: float) -> float:
    """Relative-energy decay rate guaranteed by a positive margin"""
    return 2.0 * margin if margin > 0 else 0.0
