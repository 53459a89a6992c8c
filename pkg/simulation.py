"""
Simulation Driver
Initial states, the time loop, CSV output, checkpoints and PNG snapshots
"""

import logging
import math
import struct
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from PIL import Image

from core_types import Grid, ObrbError, ScalarField, SimState, VectorField, parse_field_spec
from diagnostics import CSV_COLUMNS, DiagnosticsLog
from equilibrium import (EquilibriumSolution, aligned_equilibrium, is_aligned, smallness_margin,
                         certified_decay_rate, stability_check, steady_solve)
from flow import compute_dt, eigenmode_velocity, full_step, potential_for, random_divfree_velocity
from nonlocal_bc import BoundaryClosure, boundary_value, build_closure
from simconfig import ConfigError, RunConfig

logger = logging.getLogger(__name__)

MAGIC = b"OBRB0001"
HEADER = struct.Struct('<qqdddq')

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class CheckpointError(ObrbError):
    """Raised for unreadable, truncated or mismatched checkpoint files"""
    pass


# =============================================================================
# CHECKPOINTS
# =============================================================================

def checkpoint_write(state: SimState, path) -> Path:
    """
    Write state as magic, little-endian header (nx, ny, lx, ly, t, step), then
    Theta, ux, uy as row-major float64
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = state.grid
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(HEADER.pack(grid.nx, grid.ny, grid.lx, grid.ly, state.t, state.step))
        for array in (state.theta.values, state.u.ux, state.u.uy):
            f.write(np.ascontiguousarray(array, dtype='<f8').tobytes(order='C'))
    logger.debug(f"Checkpoint written: {path} (t={state.t:.6g}, step {state.step})")
    return path


def checkpoint_read(path, grid: Optional[Grid] = None) -> SimState:
    """
    Read a checkpoint

    Args:
        path: Checkpoint file
        grid: Expected grid; the file must match it exactly

    Raises:
        CheckpointError: Wrong magic, truncated data or grid mismatch
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (magic {data[:len(MAGIC)]!r}, expected {MAGIC!r})")
    offset = len(MAGIC)
    if len(data) < offset + HEADER.size:
        raise CheckpointError(f"{path} is truncated: header incomplete")
    nx, ny, lx, ly, t, step = HEADER.unpack_from(data, offset)
    offset += HEADER.size

    stored = Grid(nx, ny, lx, ly)
    if grid is not None and stored != grid:
        raise CheckpointError(f"Checkpoint grid {stored.describe()} does not match run grid {grid.describe()}")

    shapes = [(nx, ny), (nx + 1, ny), (nx, ny + 1)]
    expected = offset + 8 * sum(a * b for a, b in shapes)
    if len(data) != expected:
        raise CheckpointError(f"{path} is truncated or oversized: {len(data)} bytes, expected {expected}")
    arrays = []
    for shape in shapes:
        count = shape[0] * shape[1]
        arrays.append(np.frombuffer(data, dtype='<f8', count=count, offset=offset).reshape(shape).astype(float))
        offset += 8 * count
    theta, ux, uy = arrays
    return SimState(t, VectorField(stored, ux, uy), ScalarField(stored, theta), step)


# =============================================================================
# SNAPSHOTS
# =============================================================================

def quantize_gray(values: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Map values to four gray levels (white, light, dark, black for high to low)"""
    span = upper - lower if upper > lower else 1.0
    brightness = np.clip((values - lower) / span * 255.0, 0.0, 255.0)
    levels = np.select([brightness > 192, brightness > 128, brightness > 64], [255, 170, 85], 0)
    return levels.astype(np.uint8)


def save_snapshot(theta: ScalarField, path, lower: float, upper: float, min_size: int = 256) -> Path:
    """Save Theta as a grayscale PNG with y pointing up"""
    path = Path(path)
    pixels = quantize_gray(theta.values.T[::-1, :], lower, upper)
    image = Image.fromarray(pixels)
    scale = max(1, int(math.ceil(min_size / max(image.size))))
    if scale > 1:
        image = image.resize((image.width * scale, image.height * scale), Image.NEAREST)
    image.save(path)
    logger.debug(f"Saved snapshot: {path}")
    return path


# =============================================================================
# INITIAL DATA
# =============================================================================

def wall_compatible_mode(grid: Grid) -> np.ndarray:
    """
    sin(2 pi x/lx) sin(pi y/ly) at cell centers

    Zero mean and zero wall trace, so adding it to an equilibrium leaves the
    wall value unchanged. It is an exact eigenvector of the discrete Dirichlet
    Laplacian.
    """
    X, Y = grid.centers()
    return np.sin(2.0 * np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)


# =============================================================================
# TIME LOOP
# =============================================================================

def integrate(state: SimState, closure: BoundaryClosure, params, potential: ScalarField, t_end: float,
              log: Optional[DiagnosticsLog] = None,
              on_step: Optional[Callable[[SimState], None]] = None) -> SimState:
    """
    March full steps until t_end, clipping the last step to land on it

    Every accepted state is recorded in log and handed to on_step.
    """
    while t_end - state.t > 1e-12 * max(1.0, abs(t_end)):
        dt = min(compute_dt(state, params), t_end - state.t)
        state = full_step(state, closure, params, potential, dt)
        if log is not None:
            log.record(state)
        if on_step is not None:
            on_step(state)
    return state


class Simulation:
    """
    One configured run: owns the grid, the boundary closure, the potential
    and the output directory
    """

    def __init__(self, config: RunConfig, output_dir: Path = None, banner: bool = True):
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)
        self.grid = config.build_grid()
        self.params = config.params()
        self.closure = build_closure(self.grid, self.params.thetaB_spec, self.params.alpha, self.params.lin_tol)
        self.potential = potential_for(self.grid, self.params.g_spec)
        self.output_dir = Path(output_dir) if output_dir is not None else config.out_dir
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.log: Optional[DiagnosticsLog] = None
        self.state: Optional[SimState] = None

        if banner:
            self.logger.info("=" * 70)
            self.logger.info("Boussinesq Solver - Non-local Boundary Coupling")
            self.logger.info("=" * 70)
            self.logger.info(f"Config: {config.source}")
        self.logger.info(config.describe())

    # ------------------------------------------------------------------
    # Initial data
    # ------------------------------------------------------------------

    def initial_state(self) -> SimState:
        """
        Build the initial state from the [initial] descriptors

        The generator is seeded once; the temperature draws first, then the velocity.
        """
        rng = np.random.default_rng(self.params.seed)
        grid = self.grid
        theta_spec = parse_field_spec(self.config.initial.theta0_spec)
        u_spec = parse_field_spec(self.config.initial.u0_spec)
        loaded: Dict[str, SimState] = {}

        def from_file(spec) -> SimState:
            path = spec.args[0]
            if path not in loaded:
                loaded[path] = checkpoint_read(path, grid)
            return loaded[path]

        name = theta_spec.name
        if name == 'zero':
            values = np.zeros(grid.shape)
        elif name == 'constant':
            values = np.full(grid.shape, theta_spec.number(0))
        elif name == 'random':
            amplitude = theta_spec.number(0, 1.0)
            values = rng.uniform(-amplitude, amplitude, grid.shape)
        elif name == 'eigenmode':
            X, Y = grid.centers()
            values = theta_spec.number(0, 1.0) * np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)
        elif name == 'equilibrium':
            values = self.equilibrium(steady=False).thetas.values.copy()
        elif name == 'perturbed':
            values = (self.equilibrium(steady=False).thetas.values
                      + theta_spec.number(0, 1.0) * wall_compatible_mode(grid))
        elif name == 'file':
            values = from_file(theta_spec).theta.values.copy()
        else:
            raise ConfigError(f"Unknown theta0_spec {name!r}")
        theta = ScalarField(grid, values)
        theta.trace = boundary_value(theta, self.closure)

        name = u_spec.name
        if name == 'zero':
            u = VectorField.zeros(grid)
        elif name == 'random_divfree':
            u = random_divfree_velocity(grid, u_spec.number(0, 1.0), rng)
        elif name == 'eigenmode':
            u = eigenmode_velocity(grid, u_spec.number(0, 1.0))
        elif name == 'file':
            u = from_file(u_spec).u.copy()
        else:
            raise ConfigError(f"Unknown u0_spec {name!r}")

        t0 = 0.0
        step0 = 0
        if theta_spec.name == 'file' and u_spec.name == 'file' and theta_spec.args[0] == u_spec.args[0]:
            restart = loaded[theta_spec.args[0]]
            t0, step0 = restart.t, restart.step
        return SimState(t0, u, theta, step0)

    # ------------------------------------------------------------------
    # Equilibria
    # ------------------------------------------------------------------

    def equilibrium(self, steady: bool = True, tol_steady: float = 1e-8,
                    max_T: float = 200.0) -> EquilibriumSolution:
        """Closed form for aligned data, otherwise pseudo-time marching from rest"""
        if is_aligned(self.closure, self.potential):
            return aligned_equilibrium(self.grid, self.closure, potential=self.potential)
        if not steady:
            raise ConfigError("theta0_spec equilibrium and perturbed need boundary data aligned with gravity")
        init = SimState(0.0, VectorField.zeros(self.grid), ScalarField(self.grid, self.closure.thetaB.values.copy(),
                                                                       self.closure.trace))
        return steady_solve(self.closure, self.params, init, tol_steady, max_T, self.potential)

    def write_equilibrium(self, **kwargs) -> Tuple[EquilibriumSolution, Path]:
        eq = self.equilibrium(**kwargs)
        path = checkpoint_write(eq.state(), self.output_dir / 'equilibrium.bin')
        self.logger.info(f"Equilibrium written to {path} (residual {eq.residual:.3e}, "
                         f"mean Theta_s {eq.thetas.mean():.10g})")
        return eq, path

    def stability(self, **kwargs) -> Dict:
        """Stability verdict plus the relative-energy margin at the equilibrium"""
        report = stability_check(self.grid, self.closure, self.potential, self.params)
        eq = self.equilibrium(**kwargs)
        margin = smallness_margin(eq, self.closure, self.potential, self.params)
        result = report.to_dict()
        result['smallness_margin'] = margin
        result['rate_bound'] = certified_decay_rate(margin)
        return result

    # ------------------------------------------------------------------
    # Run
    # ------------------------------------------------------------------

    def run(self) -> int:
        """
        Integrate to t_end writing diagnostics.csv, violations.csv, checkpoints
        and snapshots

        Returns:
            Exit status: 0 on success, 3 on solver failure
        """
        run = self.config.run
        state = self.initial_state()
        eq = None
        if is_aligned(self.closure, self.potential):
            eq = aligned_equilibrium(self.grid, self.closure, potential=self.potential)
        self.log = DiagnosticsLog(self.closure, self.params, self.potential, state.theta, eq)
        self.log.record(state)
        self.state = state
        lower, upper = self.log.envelope
        if not (math.isfinite(lower) and math.isfinite(upper)):
            lower, upper = -self.log.theta_bound, self.log.theta_bound

        def on_step(s: SimState):
            self.state = s
            if run.checkpoint_every and s.step % run.checkpoint_every == 0:
                checkpoint_write(s, self.output_dir / f"checkpoint_{s.step:08d}.bin")
            if run.snapshot_every and s.step % run.snapshot_every == 0:
                save_snapshot(s.theta, self.output_dir / f"theta_{s.step:08d}.png", lower, upper)

        if run.snapshot_every:
            save_snapshot(state.theta, self.output_dir / f"theta_{state.step:08d}.png", lower, upper)

        self.logger.info(f"Integrating to t={run.t_end:g} from t={state.t:g}...")
        status = EXIT_OK
        try:
            integrate(state, self.closure, self.params, self.potential, run.t_end, self.log, on_step)
        except ObrbError as e:
            self.logger.error(f"Run aborted at t={self.state.t:.6g} (step {self.state.step}): {e}")
            status = EXIT_SOLVER

        final = checkpoint_write(self.state, self.output_dir / 'checkpoint_final.bin')
        self.write_outputs()
        summary = self.log.summary()
        self.logger.info(f"Finished at t={self.state.t:.6g} after {self.state.step} steps; "
                         f"final checkpoint {final}")
        self.logger.info(f"Events: {summary['events']}")
        return status

    def write_outputs(self):
        """diagnostics.csv every output_every steps (plus the last row) and violations.csv"""
        frame = self.log.to_frame()
        every = self.config.run.output_every
        keep = (frame['step'] % every == 0) | (frame.index == len(frame) - 1)
        diagnostics_path = self.output_dir / 'diagnostics.csv'
        with open(diagnostics_path, 'w', newline='') as f:
            f.write(f"# prng=PCG64 numpy={np.__version__} seed={self.params.seed}\n")
            frame.loc[keep, CSV_COLUMNS].to_csv(f, index=False, float_format='%.17g')
        violations_path = self.output_dir / 'violations.csv'
        self.log.events_frame().to_csv(violations_path, index=False, float_format='%.17g')
        self.logger.info(f"Wrote {diagnostics_path} ({int(keep.sum())} rows) and {violations_path} "
                         f"({len(self.log.events)} events)")
