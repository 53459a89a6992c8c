"""
Non-local Boundary Coupling
Domain means, the weighting operator Lambda and its inverse, the transform
that homogenizes the boundary condition, and boundary-value assembly for
Theta = thetaB - alpha * mean(Theta) on the walls.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core_types import ClosedForm, EdgeTraces, Grid, ParamsError, ScalarField, boundary_form, inner
from elliptic import apply_laplacian, solve_poisson_dirichlet

logger = logging.getLogger(__name__)


@dataclass
class BoundaryClosure:
    """
    Boundary data thetaB stored as its harmonic extension, plus alpha

    Attributes:
        thetaB: Harmonic extension over the grid, with the edge trace attached
        alpha: Non-local coefficient in [0, 1)
        form: Closed form the data came from (None for numerically supplied data)
        spec: Descriptor text, for reports
        residual: Relative discrete-harmonic residual of the extension
    """

    thetaB: ScalarField
    alpha: float
    form: Optional[ClosedForm] = None
    spec: str = ''
    residual: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.thetaB.grid

    @property
    def trace(self) -> EdgeTraces:
        return self.thetaB.trace

    def with_alpha(self, alpha: float) -> 'BoundaryClosure':
        return BoundaryClosure(self.thetaB, alpha, self.form, self.spec, self.residual)


def build_closure(grid: Grid, thetaB_spec, alpha: float, tol: float = 1e-10) -> BoundaryClosure:
    """
    Build the boundary closure for a descriptor

    Descriptors that are exactly discrete-harmonic (constant, affine, bilinear)
    are evaluated in closed form; any other data is extended by a Dirichlet
    Laplace solve from its boundary trace.

    Args:
        grid: Target grid
        thetaB_spec: Boundary-data descriptor, e.g. "affine(1, 0, -1)"
        alpha: Non-local coefficient in [0, 1)
        tol: Linear-solver tolerance for the numerical extension

    Returns:
        BoundaryClosure

    Raises:
        ParamsError: If alpha is outside [0, 1)
        SpecError: For unknown descriptors
    """
    if not 0.0 <= alpha < 1.0:
        raise ParamsError(f"alpha = {alpha} violates the hypothesis 0 < alpha < 1")
    form = boundary_form(grid, thetaB_spec)
    trace = EdgeTraces.from_function(grid, form.value)
    if form.harmonic:
        X, Y = grid.centers()
        extension = ScalarField(grid, form.value(X, Y), trace)
    else:
        extension, report = solve_poisson_dirichlet(grid, ScalarField.zeros(grid), trace, tol)
        logger.info(f"Harmonic extension of {thetaB_spec}: {report.iterations} CG iterations, "
                    f"residual {report.residual:.2e}")
    residual = harmonic_residual(extension)
    logger.debug(f"Boundary closure {thetaB_spec} (alpha={alpha}): harmonic residual {residual:.2e}")
    return BoundaryClosure(extension, float(alpha), form, str(thetaB_spec), residual)


def harmonic_residual(extension: ScalarField) -> float:
    """max|lap_h v| relative to the boundary scale over h^2"""
    grid = extension.grid
    scale = max(1.0, extension.trace.max_abs()) / min(grid.hx, grid.hy) ** 2
    return float(np.max(np.abs(apply_laplacian(extension)))) / scale


# =============================================================================
# THE LAMBDA OPERATOR
# =============================================================================

def lambda_apply(field: ScalarField, alpha: float) -> ScalarField:
    """Lambda Z = Z - alpha/(1+alpha) * mean(Z)"""
    shift = alpha / (1.0 + alpha) * field.mean()
    return ScalarField(field.grid, field.values - shift)


def lambda_inverse(field: ScalarField, alpha: float) -> ScalarField:
    """Inverse of Lambda: W + alpha * mean(W)"""
    return ScalarField(field.grid, field.values + alpha * field.mean())


def lambda_energy(values: np.ndarray, grid: Grid, alpha: float) -> float:
    """One half of <Lambda Z, Z> for a cell array"""
    m = float(np.mean(values))
    return 0.5 * (inner(values, values, grid) - alpha / (1.0 + alpha) * m * m * grid.area)


# =============================================================================
# TRANSFORM AND BOUNDARY VALUES
# =============================================================================

def boundary_value(theta: ScalarField, closure: BoundaryClosure) -> EdgeTraces:
    """Edge-midpoint traces of thetaB - alpha * mean(theta)"""
    return closure.trace.shifted(-closure.alpha * theta.mean())


def to_calT(theta: ScalarField, closure: BoundaryClosure) -> ScalarField:
    """
    calT = Theta + alpha * mean(Theta) - thetaB

    The trace is built from the trace carried by theta, or from the closure
    value when theta carries none (the transform then vanishes on the walls).
    """
    shift = closure.alpha * theta.mean()
    values = theta.values + shift - closure.thetaB.values
    source = theta.trace if theta.trace is not None else boundary_value(theta, closure)
    trace = EdgeTraces(*(a + shift - b for a, b in zip(source.edges().values(),
                                                        closure.trace.edges().values())))
    return ScalarField(theta.grid, values, trace)


def from_calT(calT: ScalarField, closure: BoundaryClosure) -> ScalarField:
    """Theta = calT + thetaB - alpha/(1+alpha) * mean(calT + thetaB)"""
    alpha = closure.alpha
    total = calT.values + closure.thetaB.values
    shift = alpha / (1.0 + alpha) * float(np.mean(total))
    values = total - shift
    base = calT.trace if calT.trace is not None else EdgeTraces.constant(calT.grid, 0.0)
    trace = EdgeTraces(*(a + b - shift for a, b in zip(base.edges().values(),
                                                       closure.trace.edges().values())))
    return ScalarField(calT.grid, values, trace)


def thermal_energy(theta: ScalarField, closure: BoundaryClosure) -> float:
    """One half of <Lambda calT, calT>"""
    calT = to_calT(theta, closure)
    return lambda_energy(calT.values, theta.grid, closure.alpha)


def boundary_mismatch(theta: ScalarField, closure: BoundaryClosure) -> float:
    """Largest edge-wise gap between theta's trace and the non-local value"""
    if theta.trace is None:
        return 0.0
    return theta.trace.max_deviation(boundary_value(theta, closure))
