"""
Core Types for the Boussinesq Solver
Grid, field containers, parameter records and their validation
"""

import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class ObrbError(Exception):
    """Base class for all solver errors"""
    pass


class GridError(ObrbError, ValueError):
    """Raised for inconsistent grid dimensions"""
    pass


class ParamsError(ObrbError, ValueError):
    """Raised when physical or numerical parameters are out of range"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(message)


class SpecError(ObrbError, ValueError):
    """Raised for unknown or malformed field descriptors"""
    pass


# =============================================================================
# GRID
# =============================================================================

@dataclass(frozen=True)
class Grid:
    """
    Rectangular staggered grid on (0, lx) x (0, ly)

    Scalars live at cell centers (nx x ny), ux on x-faces ((nx+1) x ny),
    uy on y-faces (nx x (ny+1)). Arrays are indexed [i, j] with i along x.
    """

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise GridError(f"Grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise GridError(f"Domain lengths must be positive, got {self.lx}x{self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def h_max(self) -> float:
        return max(self.hx, self.hy)

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as (X, Y) arrays of shape (nx, ny)"""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing='ij')

    def nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-corner coordinates as (X, Y) arrays of shape (nx+1, ny+1)"""
        x = np.arange(self.nx + 1) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing='ij')

    def describe(self) -> str:
        return f"{self.nx}x{self.ny} on [0,{self.lx:g}]x[0,{self.ly:g}]"


def build_grid(nx: int, ny: int, lx: float, ly: float) -> Grid:
    """
    Build a validated grid

    Args:
        nx, ny: Cell counts (each at least 4)
        lx, ly: Domain lengths (positive)

    Returns:
        Grid with spacings lx/nx, ly/ny

    Raises:
        GridError: If counts or lengths are out of range
    """
    if int(nx) != nx or int(ny) != ny:
        raise GridError(f"Cell counts must be integers, got {nx}, {ny}")
    grid = Grid(int(nx), int(ny), float(lx), float(ly))
    logger.debug(f"Built grid {grid.describe()} (hx={grid.hx:g}, hy={grid.hy:g})")
    return grid


# =============================================================================
# FIELDS
# =============================================================================

@dataclass
class EdgeTraces:
    """Boundary values at edge midpoints, one array per edge"""

    west: np.ndarray   # x = 0, length ny
    east: np.ndarray   # x = lx, length ny
    south: np.ndarray  # y = 0, length nx
    north: np.ndarray  # y = ly, length nx

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'EdgeTraces':
        return cls(np.full(grid.ny, float(value)), np.full(grid.ny, float(value)),
                   np.full(grid.nx, float(value)), np.full(grid.nx, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> 'EdgeTraces':
        """Evaluate func(x, y) at the midpoints of the boundary faces"""
        x, y = grid.x_centers(), grid.y_centers()
        return cls(
            west=np.broadcast_to(func(np.zeros_like(y), y), y.shape).astype(float),
            east=np.broadcast_to(func(np.full_like(y, grid.lx), y), y.shape).astype(float),
            south=np.broadcast_to(func(x, np.zeros_like(x)), x.shape).astype(float),
            north=np.broadcast_to(func(x, np.full_like(x, grid.ly)), x.shape).astype(float),
        )

    def edges(self) -> Dict[str, np.ndarray]:
        return {'west': self.west, 'east': self.east, 'south': self.south, 'north': self.north}

    def shifted(self, delta: float) -> 'EdgeTraces':
        """Return traces with a constant added on every edge"""
        return EdgeTraces(self.west + delta, self.east + delta, self.south + delta, self.north + delta)

    def max(self) -> float:
        return float(max(np.max(a) for a in self.edges().values()))

    def min(self) -> float:
        return float(min(np.min(a) for a in self.edges().values()))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(a)) for a in self.edges().values()))

    def max_deviation(self, other: 'EdgeTraces') -> float:
        """Largest edge-wise difference to another set of traces"""
        return float(max(np.max(np.abs(a - b))
                         for a, b in zip(self.edges().values(), other.edges().values())))


@dataclass
class ScalarField:
    """Cell-centered scalar with an optional boundary trace"""

    grid: Grid
    values: np.ndarray
    trace: Optional[EdgeTraces] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridError(f"Scalar field shape {self.values.shape} does not match grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid) -> 'ScalarField':
        return cls(grid, np.zeros(grid.shape), EdgeTraces.constant(grid, 0.0))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'ScalarField':
        return cls(grid, np.full(grid.shape, float(value)), EdgeTraces.constant(grid, value))

    def copy(self) -> 'ScalarField':
        trace = None
        if self.trace is not None:
            trace = EdgeTraces(*(a.copy() for a in self.trace.edges().values()))
        return ScalarField(self.grid, self.values.copy(), trace)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def mean(self) -> float:
        """Cell average; equals sum(values) * hx * hy / |Omega| on a uniform grid"""
        return float(np.mean(self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2) * self.grid.cell_area))


@dataclass
class VectorField:
    """Face-centered velocity; wall-normal components are forced to zero"""

    grid: Grid
    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        nx, ny = self.grid.shape
        self.ux = np.array(self.ux, dtype=float)
        self.uy = np.array(self.uy, dtype=float)
        if self.ux.shape != (nx + 1, ny) or self.uy.shape != (nx, ny + 1):
            raise GridError(f"Velocity shapes {self.ux.shape}, {self.uy.shape} do not match grid {nx}x{ny}")
        self.ux[0, :] = 0.0
        self.ux[-1, :] = 0.0
        self.uy[:, 0] = 0.0
        self.uy[:, -1] = 0.0

    @classmethod
    def zeros(cls, grid: Grid) -> 'VectorField':
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> 'VectorField':
        return VectorField(self.grid, self.ux.copy(), self.uy.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ux)) and np.all(np.isfinite(self.uy)))

    def divergence(self) -> np.ndarray:
        """Discrete divergence at cell centers"""
        return ((self.ux[1:, :] - self.ux[:-1, :]) / self.grid.hx
                + (self.uy[:, 1:] - self.uy[:, :-1]) / self.grid.hy)

    def max_abs(self) -> Tuple[float, float]:
        return float(np.max(np.abs(self.ux))), float(np.max(np.abs(self.uy)))

    def kinetic_energy(self) -> float:
        """One half of the discrete L2 norm squared, face control volumes hx*hy"""
        return 0.5 * float(np.sum(self.ux ** 2) + np.sum(self.uy ** 2)) * self.grid.cell_area

    def l2_norm(self) -> float:
        return math.sqrt(2.0 * self.kinetic_energy())

    def __sub__(self, other: 'VectorField') -> 'VectorField':
        return VectorField(self.grid, self.ux - other.ux, self.uy - other.uy)


def inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Discrete L2 inner product hx*hy*sum(a*b)"""
    return float(np.sum(a * b) * grid.cell_area)


def cell_gradient(field: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gradient at cell centers from face differences

    Boundary faces use the half-cell difference to the trace when one is
    attached, otherwise the neighboring interior face value.

    Returns:
        (gx, gy) arrays of shape (nx, ny)
    """
    grid = field.grid
    v = field.values
    fx = np.empty((grid.nx + 1, grid.ny))
    fy = np.empty((grid.nx, grid.ny + 1))
    fx[1:-1, :] = (v[1:, :] - v[:-1, :]) / grid.hx
    fy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / grid.hy
    if field.trace is not None:
        fx[0, :] = (v[0, :] - field.trace.west) / (0.5 * grid.hx)
        fx[-1, :] = (field.trace.east - v[-1, :]) / (0.5 * grid.hx)
        fy[:, 0] = (v[:, 0] - field.trace.south) / (0.5 * grid.hy)
        fy[:, -1] = (field.trace.north - v[:, -1]) / (0.5 * grid.hy)
    else:
        fx[0, :], fx[-1, :] = fx[1, :], fx[-2, :]
        fy[:, 0], fy[:, -1] = fy[:, 1], fy[:, -2]
    return 0.5 * (fx[:-1, :] + fx[1:, :]), 0.5 * (fy[:, :-1] + fy[:, 1:])


def gradient_sup_norm(field: ScalarField) -> float:
    """Grid maximum of |grad field| at cell centers"""
    gx, gy = cell_gradient(field)
    return float(np.max(np.hypot(gx, gy)))


# =============================================================================
# CLOSED-FORM DESCRIPTORS
# =============================================================================

_SPEC_PATTERN = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$')


@dataclass(frozen=True)
class FieldSpec:
    """Parsed descriptor such as linear_y(-1) or affine(1, 0, -1)"""

    name: str
    args: Tuple = ()

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(a) for a in self.args)})"

    def number(self, index: int, default: Optional[float] = None) -> float:
        if index < len(self.args):
            try:
                return float(self.args[index])
            except ValueError:
                raise SpecError(f"{self}: argument {index + 1} is not a number")
        if default is None:
            raise SpecError(f"{self}: missing argument {index + 1}")
        return default


def parse_field_spec(spec) -> FieldSpec:
    """
    Parse a descriptor string into a FieldSpec

    Args:
        spec: Text like "linear_y(-1)" or an existing FieldSpec

    Raises:
        SpecError: If the text is not of the form name or name(args)
    """
    if isinstance(spec, FieldSpec):
        return spec
    match = _SPEC_PATTERN.match(str(spec))
    if not match:
        raise SpecError(f"Malformed field descriptor: {spec!r}")
    name, raw = match.group(1), match.group(2)
    args = tuple(a.strip() for a in raw.split(',')) if raw and raw.strip() else ()
    return FieldSpec(name, args)


@dataclass(frozen=True)
class ClosedForm:
    """A smooth function of (x, y) with its gradient"""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    harmonic: bool = True


def _potential_form(grid: Grid, spec: FieldSpec) -> ClosedForm:
    c = spec.number(0)
    if spec.name == 'linear_y':
        return ClosedForm(lambda x, y: c * (y - 0.5 * grid.ly) + 0.0 * x,
                          lambda x, y: (0.0 * x, c + 0.0 * y))
    if spec.name == 'linear_x':
        return ClosedForm(lambda x, y: c * (x - 0.5 * grid.lx) + 0.0 * y,
                          lambda x, y: (c + 0.0 * x, 0.0 * y))
    if spec.name == 'harmonic_xy':
        return ClosedForm(lambda x, y: c * (x * y - 0.25 * grid.lx * grid.ly),
                          lambda x, y: (c * y, c * x))
    raise SpecError(f"Unknown potential {spec.name!r} (expected linear_y, linear_x or harmonic_xy)")


def _boundary_form(grid: Grid, spec: FieldSpec) -> ClosedForm:
    if spec.name == 'constant':
        b = spec.number(0)
        return ClosedForm(lambda x, y: b + 0.0 * (x + y),
                          lambda x, y: (0.0 * x, 0.0 * y))
    if spec.name == 'affine':
        a, bx, by = spec.number(0), spec.number(1, 0.0), spec.number(2, 0.0)
        return ClosedForm(lambda x, y: a + bx * x + by * y,
                          lambda x, y: (bx + 0.0 * x, by + 0.0 * y))
    if spec.name == 'bilinear':
        c = spec.number(0)
        return ClosedForm(lambda x, y: c * x * y,
                          lambda x, y: (c * y, c * x))
    if spec.name == 'cosine_x':
        a = spec.number(0)
        k = math.pi / grid.lx
        return ClosedForm(lambda x, y: a * np.cos(k * x) + 0.0 * y,
                          lambda x, y: (-a * k * np.sin(k * x), 0.0 * y),
                          harmonic=False)
    raise SpecError(f"Unknown boundary data {spec.name!r} "
                    f"(expected constant, affine, bilinear or cosine_x)")


def make_potential(grid: Grid, g_spec) -> ScalarField:
    """
    Evaluate a harmonic, zero-mean gravitational potential on the grid

    Args:
        grid: Target grid
        g_spec: Descriptor text or FieldSpec (linear_y(c), linear_x(c), harmonic_xy(c))

    Returns:
        Cell-centered G with its edge trace attached

    Raises:
        SpecError: For unknown descriptors
    """
    form = _potential_form(grid, parse_field_spec(g_spec))
    X, Y = grid.centers()
    values = form.value(X, Y)
    # built-ins are centered analytically; remove quadrature roundoff only
    shift = float(np.mean(values))
    values = values - shift
    trace = EdgeTraces.from_function(grid, form.value).shifted(-shift)
    return ScalarField(grid, values, trace)


def boundary_form(grid: Grid, thetaB_spec) -> ClosedForm:
    """Closed form behind a boundary-data descriptor"""
    return _boundary_form(grid, parse_field_spec(thetaB_spec))


def alpha_from_gamma(gamma: float) -> float:
    """
    Non-local coefficient from the adiabatic exponent, alpha = gamma - 1

    Raises:
        ParamsError: Unless 1 < gamma < 2, i.e. 0 < alpha < 1
    """
    if not 1.0 < gamma < 2.0:
        raise ParamsError(f"gamma = {gamma} gives alpha = {gamma - 1.0:g}, "
                          f"violating the hypothesis 0 < alpha < 1 (need 1 < gamma < 2)", "gamma")
    return gamma - 1.0


# =============================================================================
# PARAMETERS AND STATE
# =============================================================================

@dataclass(frozen=True)
class Params:
    """Physical constants and numerical controls"""

    mu: float
    kappa: float
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    g_spec: str = 'linear_y(-1)'
    thetaB_spec: str = 'constant(0)'
    dt_cfl: float = 0.5
    dt_max: float = 0.02
    lin_tol: float = 1e-10
    seed: int = 0
    bc_coupling: str = 'implicit'
    advection: str = 'upwind'

    def __post_init__(self):
        if self.alpha is None:
            if self.gamma is None:
                raise ParamsError("Either alpha or gamma must be given")
            object.__setattr__(self, 'alpha', alpha_from_gamma(self.gamma))
        elif self.gamma is not None and self.alpha != alpha_from_gamma(self.gamma):
            raise ParamsError(f"alpha = {self.alpha} is inconsistent with gamma = {self.gamma}", "gamma")
        if not 0.0 < self.alpha < 1.0:
            raise ParamsError(f"alpha = {self.alpha} violates the hypothesis 0 < alpha < 1", "alpha")
        if not self.mu > 0.0:
            raise ParamsError(f"Viscosity mu must be positive, got {self.mu}", "mu")
        if not self.kappa > 0.0:
            raise ParamsError(f"Diffusivity kappa must be positive, got {self.kappa}", "kappa")
        if not 0.0 < self.dt_cfl <= 1.0:
            raise ParamsError(f"dt_cfl must lie in (0, 1], got {self.dt_cfl}", "dt_cfl")
        if not self.dt_max > 0.0:
            raise ParamsError(f"dt_max must be positive, got {self.dt_max}", "dt_max")
        if not self.lin_tol > 0.0:
            raise ParamsError(f"lin_tol must be positive, got {self.lin_tol}", "lin_tol")
        if self.bc_coupling not in ('implicit', 'lagged'):
            raise ParamsError(f"bc_coupling must be implicit or lagged, got {self.bc_coupling!r}", "bc_coupling")
        if self.advection not in ('upwind', 'limited'):
            raise ParamsError(f"advection must be upwind or limited, got {self.advection!r}", "advection")
        parse_field_spec(self.g_spec)
        parse_field_spec(self.thetaB_spec)

    def with_changes(self, **changes) -> 'Params':
        if 'gamma' in changes and 'alpha' not in changes:
            changes['alpha'] = None
        elif 'alpha' in changes:
            changes.setdefault('gamma', None)
        return replace(self, **changes)


@dataclass
class SimState:
    """The evolving pair (u, theta) with time and step counter"""

    t: float
    u: VectorField
    theta: ScalarField
    step: int = 0
    pressure: Optional[ScalarField] = field(default=None, compare=False)

    @property
    def grid(self) -> Grid:
        return self.theta.grid

    def copy(self) -> 'SimState':
        return SimState(self.t, self.u.copy(), self.theta.copy(), self.step,
                        None if self.pressure is None else self.pressure.copy())

    def divergence_max(self) -> float:
        return float(np.max(np.abs(self.u.divergence())))
