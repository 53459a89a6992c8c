"""
Elliptic Solvers
Dirichlet/Neumann Poisson, implicit-diffusion (Helmholtz) systems, the
rank-one closure for the mean-coupled boundary value, and the Poincare
constant estimator. All operators are assembled as sparse 5-point stencils.
"""

import logging
import math
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, factorized

from core_types import EdgeTraces, Grid, ObrbError, ScalarField

logger = logging.getLogger(__name__)

# Relative residual below which conjugate gradients stagnates in double precision
MIN_RELATIVE_TOL = 1e-12


class SolverError(ObrbError):
    """Raised when a linear or eigen solve cannot deliver the requested accuracy"""
    pass


class SingularCouplingError(SolverError):
    """Raised when the rank-one mean closure degenerates"""
    pass


class IncompatibleRHSError(SolverError, ValueError):
    """Raised when a pure-Neumann right-hand side has nonzero mean"""
    pass


@dataclass
class LinearSolveReport:
    """Outcome of one iterative solve"""

    iterations: int
    residual: float
    converged: bool

    def to_dict(self) -> Dict:
        return asdict(self)

    @staticmethod
    def combine(*reports: 'LinearSolveReport') -> 'LinearSolveReport':
        return LinearSolveReport(
            iterations=sum(r.iterations for r in reports),
            residual=max(r.residual for r in reports),
            converged=all(r.converged for r in reports),
        )


# =============================================================================
# OPERATOR ASSEMBLY
# =============================================================================

def _axis_operator(n: int, h: float, kind: str) -> sparse.csr_matrix:
    """
    One-dimensional second difference on n unknowns

    kind:
        'cell'     - cell centers, Dirichlet value on the wall half a cell away
        'node'     - interior nodes, Dirichlet value on the wall node itself
        'neumann'  - cell centers, zero normal derivative on the wall
    """
    main = np.full(n, -2.0)
    if kind == 'cell':
        main[0] = main[-1] = -3.0
    elif kind == 'neumann':
        main[0] = main[-1] = -1.0
    elif kind != 'node':
        raise ValueError(f"Unknown axis operator kind: {kind}")
    off = np.ones(n - 1)
    return sparse.diags([off, main, off], [-1, 0, 1], format='csr') / (h * h)


@lru_cache(maxsize=64)
def laplacian_matrix(n1: int, h1: float, kind1: str, n2: int, h2: float, kind2: str) -> sparse.csr_matrix:
    """5-point Laplacian on an n1 x n2 block flattened in C order"""
    lap = (sparse.kron(_axis_operator(n1, h1, kind1), sparse.identity(n2))
           + sparse.kron(sparse.identity(n1), _axis_operator(n2, h2, kind2)))
    return lap.tocsr()


def cell_laplacian(grid: Grid, boundary: str = 'dirichlet') -> sparse.csr_matrix:
    """Laplacian on cell centers, without the boundary lift"""
    kind = 'cell' if boundary == 'dirichlet' else 'neumann'
    return laplacian_matrix(grid.nx, grid.hx, kind, grid.ny, grid.hy, kind)


def face_laplacian(grid: Grid, component: str) -> sparse.csr_matrix:
    """Laplacian on interior faces of one velocity component with no-slip walls"""
    if component == 'x':
        return laplacian_matrix(grid.nx - 1, grid.hx, 'node', grid.ny, grid.hy, 'cell')
    if component == 'y':
        return laplacian_matrix(grid.nx, grid.hx, 'cell', grid.ny - 1, grid.hy, 'node')
    raise ValueError(f"Unknown velocity component: {component}")


def dirichlet_lift(grid: Grid, trace: EdgeTraces) -> np.ndarray:
    """Boundary contribution so that lap(v) = L @ v + lift for the given trace"""
    lift = np.zeros(grid.shape)
    lift[0, :] += 2.0 * trace.west / grid.hx ** 2
    lift[-1, :] += 2.0 * trace.east / grid.hx ** 2
    lift[:, 0] += 2.0 * trace.south / grid.hy ** 2
    lift[:, -1] += 2.0 * trace.north / grid.hy ** 2
    return lift


def apply_laplacian(field: ScalarField) -> np.ndarray:
    """Discrete Laplacian of a field using its attached Dirichlet trace"""
    if field.trace is None:
        raise ValueError("apply_laplacian needs a field with a boundary trace")
    grid = field.grid
    lap = cell_laplacian(grid) @ field.values.ravel()
    return lap.reshape(grid.shape) + dirichlet_lift(grid, field.trace)


def dirichlet_energy(values: np.ndarray, grid: Grid) -> float:
    """||grad v||^2 for a cell field vanishing on the boundary"""
    v = values.ravel()
    return float(-v @ (cell_laplacian(grid) @ v) * grid.cell_area)


def face_dirichlet_energy(values: np.ndarray, grid: Grid, component: str) -> float:
    """||grad w||^2 for one no-slip velocity component given on interior faces"""
    w = values.ravel()
    return float(-w @ (face_laplacian(grid, component) @ w) * grid.cell_area)


def iteration_cap(n: int, tol: float) -> int:
    return int(math.ceil(10.0 * math.sqrt(n) * math.log(1.0 / tol))) + 10


def conjugate_gradient(A: sparse.spmatrix, b: np.ndarray, tol: float,
                       x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, LinearSolveReport]:
    """
    Jacobi-preconditioned conjugate gradients for a symmetric positive
    (semi-)definite system

    Args:
        A: Sparse matrix
        b: Right-hand side
        tol: Target relative residual ||b - A x|| / ||b||
        x0: Optional starting guess

    Returns:
        Tuple of (solution, LinearSolveReport)
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), LinearSolveReport(0, 0.0, True)

    preconditioner = sparse.diags(1.0 / A.diagonal())
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    target = max(tol, MIN_RELATIVE_TOL)
    x, info = cg(A, b, x0=x0, rtol=0.5 * target, atol=0.0,
                 maxiter=iteration_cap(b.size, target), M=preconditioner, callback=count)
    residual = float(np.linalg.norm(b - A @ x)) / bnorm
    report = LinearSolveReport(iterations, residual, info == 0 and residual <= target)
    if not report.converged:
        logger.warning(f"CG stopped after {iterations} iterations at residual {residual:.3e} "
                       f"(target {target:.1e})")
    else:
        logger.debug(f"CG converged in {iterations} iterations, residual {residual:.3e}")
    return x, report


# =============================================================================
# SOLVERS
# =============================================================================

def solve_poisson_dirichlet(grid: Grid, rhs: ScalarField, boundary_values: EdgeTraces,
                            tol: float) -> Tuple[ScalarField, LinearSolveReport]:
    """
    Solve lap_h(v) = rhs with v = boundary_values on the walls

    Returns:
        Tuple of (solution carrying the trace, LinearSolveReport)
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    A = -cell_laplacian(grid)
    b = (dirichlet_lift(grid, boundary_values) - rhs.values).ravel()
    x, report = conjugate_gradient(A, b, tol)
    return ScalarField(grid, x.reshape(grid.shape), boundary_values), report


def solve_poisson_neumann_zero_mean(grid: Grid, rhs: ScalarField,
                                    tol: float) -> Tuple[ScalarField, LinearSolveReport]:
    """
    Solve lap_h(v) = rhs with homogeneous Neumann walls, normalized to zero mean

    Raises:
        IncompatibleRHSError: If the mean of rhs exceeds tol (relative to max|rhs|)
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    measured = rhs.mean()
    scale = max(1.0, float(np.max(np.abs(rhs.values))))
    if abs(measured) > tol * scale:
        raise IncompatibleRHSError(f"Neumann problem is incompatible: rhs mean is {measured:.3e} "
                                   f"(tolerance {tol * scale:.1e})")
    A = -cell_laplacian(grid, boundary='neumann')
    b = -(rhs.values - measured).ravel()
    x, report = conjugate_gradient(A, b, tol)
    x -= np.mean(x)
    return ScalarField(grid, x.reshape(grid.shape)), report


def solve_helmholtz_dirichlet(grid: Grid, c: float, rhs: ScalarField, boundary_values: EdgeTraces,
                              tol: float) -> Tuple[ScalarField, LinearSolveReport]:
    """
    Solve (Id - c lap_h) v = rhs with a Dirichlet trace

    Args:
        c: Positive diffusion number (kappa*dt or mu*dt)
    """
    if not c > 0:
        raise ValueError(f"Helmholtz coefficient must be positive, got {c}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = grid.nx * grid.ny
    A = sparse.identity(n, format='csr') - c * cell_laplacian(grid)
    b = (rhs.values + c * dirichlet_lift(grid, boundary_values)).ravel()
    x, report = conjugate_gradient(A, b, tol, x0=rhs.values.ravel().copy())
    return ScalarField(grid, x.reshape(grid.shape), boundary_values), report


@lru_cache(maxsize=8)
def unit_boundary_response(grid: Grid, c: float, tol: float) -> Tuple[ScalarField, LinearSolveReport]:
    """Solution of (Id - c lap_h) v = 0 with v = 1 on every wall; 0 <= v <= 1"""
    field, report = solve_helmholtz_dirichlet(grid, c, ScalarField(grid, np.zeros(grid.shape)),
                                              EdgeTraces.constant(grid, 1.0), tol)
    field.values.setflags(write=False)
    return field, report


def solve_helmholtz_rank_one(grid: Grid, c: float, rhs: ScalarField, thetaB_trace: EdgeTraces,
                             alpha: float, tol: float) -> Tuple[ScalarField, LinearSolveReport]:
    """
    Solve (Id - c lap_h) v = rhs with the mean-coupled trace thetaB - alpha*mean(v)

    Two Dirichlet solves are combined by the exact scalar closure
    m = m0 / (1 + alpha*m1), where m0 is the mean of the solve with trace thetaB
    and m1 the mean of the unit boundary response.

    Raises:
        SingularCouplingError: If 1 + alpha*m1 vanishes
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if alpha == 0.0:
        return solve_helmholtz_dirichlet(grid, c, rhs, thetaB_trace, tol)

    base, base_report = solve_helmholtz_dirichlet(grid, c, rhs, thetaB_trace, tol)
    unit, unit_report = unit_boundary_response(grid, c, tol)
    m0, m1 = base.mean(), unit.mean()
    denominator = 1.0 + alpha * m1
    if abs(denominator) <= 1e-12:
        raise SingularCouplingError(f"Mean closure is singular: 1 + alpha*m1 = {denominator:.3e}")
    m = m0 / denominator
    values = base.values - alpha * m * unit.values
    field = ScalarField(grid, values, thetaB_trace.shifted(-alpha * m))
    return field, LinearSolveReport.combine(base_report, unit_report)


def solve_helmholtz_velocity(grid: Grid, c: float, rhs: np.ndarray, component: str,
                             tol: float) -> Tuple[np.ndarray, LinearSolveReport]:
    """
    Implicit viscous solve (Id - c lap_h) w = rhs on interior faces of one
    velocity component; walls carry zero velocity

    Args:
        rhs: Interior-face array, (nx-1, ny) for 'x' or (nx, ny-1) for 'y'
    """
    lap = face_laplacian(grid, component)
    A = sparse.identity(lap.shape[0], format='csr') - c * lap
    x, report = conjugate_gradient(A, rhs.ravel(), tol, x0=rhs.ravel().copy())
    return x.reshape(rhs.shape), report


# =============================================================================
# POINCARE CONSTANT
# =============================================================================

def smallest_dirichlet_eigenpair(grid: Grid, tol: float = 1e-10,
                                 max_iter: int = 500) -> Tuple[float, np.ndarray]:
    """
    Smallest eigenvalue of -lap_h with Dirichlet walls by inverse power iteration

    Returns:
        Tuple of (eigenvalue, unit-norm eigenvector shaped like the grid)

    Raises:
        SolverError: If the Rayleigh quotient has not settled after max_iter steps
    """
    A = (-cell_laplacian(grid)).tocsc()
    solve = factorized(A)
    x = np.ones(grid.nx * grid.ny)
    x /= np.linalg.norm(x)
    eigenvalue = float(x @ (A @ x))
    for iteration in range(1, max_iter + 1):
        y = solve(x)
        y /= np.linalg.norm(y)
        updated = float(y @ (A @ y))
        x = y
        if abs(updated - eigenvalue) <= tol * updated:
            logger.debug(f"Inverse iteration settled after {iteration} steps: lambda_1 = {updated:.10g}")
            return updated, x.reshape(grid.shape)
        eigenvalue = updated
    raise SolverError(f"Inverse power iteration did not converge in {max_iter} iterations "
                      f"(last eigenvalue {eigenvalue:.10g})")


@lru_cache(maxsize=16)
def poincare_constant(grid: Grid, tol: float = 1e-10) -> float:
    """
    Best constant C_p in C_p ||v|| <= ||grad v|| for v vanishing on the walls

    Returns:
        sqrt of the smallest discrete Dirichlet eigenvalue
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    eigenvalue, _ = smallest_dirichlet_eigenpair(grid, tol)
    return math.sqrt(eigenvalue)
