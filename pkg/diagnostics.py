"""
Diagnostics
Energies, temperature envelopes, per-step budget residuals, relative
energies, decay-rate fits, running time averages and absorbing radii.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from core_types import Params, ParamsError, ScalarField, SimState
from elliptic import dirichlet_energy
from equilibrium import EquilibriumSolution
from flow import buoyancy_work, velocity_dirichlet_energy
from heat import max_principle_excess
from nonlocal_bc import BoundaryClosure, boundary_value, lambda_energy, to_calT

logger = logging.getLogger(__name__)

# Columns written to diagnostics.csv, in order
CSV_COLUMNS = ['t', 'KE', 'thermal_E', 'theta_min', 'theta_max', 'theta_bound', 'div_max',
               'ke_budget_res', 'thermal_budget_res', 'rel_energy', 'mean_theta']

# In-memory extras
EXTRA_COLUMNS = ['step', 'theta_sup', 'theta_inf', 'l2_sum']

EVENT_KINDS = ('max_principle', 'theta_bound', 'truncation', 'energy_sign')


# =============================================================================
# TEMPERATURE BOUNDS
# =============================================================================

def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ParamsError(f"alpha = {alpha} violates the hypothesis 0 < alpha < 1")


def theta_uniform_bound(theta0: ScalarField, closure: BoundaryClosure) -> float:
    """
    Uniform temperature bound max|Theta_0| + 2/(1 - alpha^2) * max|thetaB|

    Raises:
        ParamsError: If alpha is outside (0, 1)
    """
    alpha = closure.alpha
    _check_alpha(alpha)
    return float(np.max(np.abs(theta0.values))) + 2.0 / (1.0 - alpha * alpha) * closure.trace.max_abs()


def theta_envelope(theta0: ScalarField, closure: BoundaryClosure) -> Tuple[float, float]:
    """
    Sharp (lower, upper) bounds from the case analysis behind the uniform bound

    The running supremum U and infimum L satisfy U <= max(sup Theta_0, max thetaB - alpha L)
    and L >= min(inf Theta_0, min thetaB - alpha U); eliminating the coupling
    gives the three candidates per side.
    """
    alpha = closure.alpha
    _check_alpha(alpha)
    sup0, inf0 = float(np.max(theta0.values)), float(np.min(theta0.values))
    b_max, b_min = closure.trace.max(), closure.trace.min()
    denom = 1.0 - alpha * alpha
    upper = max(sup0, b_max - alpha * inf0, (b_max - alpha * b_min) / denom)
    lower = min(inf0, b_min - alpha * sup0, (b_min - alpha * b_max) / denom)
    return lower, upper


def truncation_energies(theta: ScalarField, upper: float, lower: float) -> Tuple[float, float]:
    """1/2 int([Theta - upper]^+)^2 and 1/2 int([Theta - lower]^-)^2"""
    area = theta.grid.cell_area
    above = np.maximum(theta.values - upper, 0.0)
    below = np.minimum(theta.values - lower, 0.0)
    return 0.5 * float(np.sum(above ** 2)) * area, 0.5 * float(np.sum(below ** 2)) * area


# =============================================================================
# LOG
# =============================================================================

@dataclass
class ViolationEvent:
    """A recorded departure from a monitored property; the run continues"""

    kind: str
    t: float
    step: int
    value: float
    state: Optional[SimState] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {'kind': self.kind, 't': self.t, 'step': self.step, 'value': self.value}


class DiagnosticsLog:
    """
    Time series of everything the verification suites check

    One log follows one simulation; record() is called once per accepted step
    (and once for the initial state).
    """

    def __init__(self, closure: BoundaryClosure, params: Params, potential: ScalarField,
                 theta0: ScalarField, equilibrium: Optional[EquilibriumSolution] = None,
                 keep_states: bool = True):
        self.closure = closure
        self.params = params
        self.potential = potential
        self.equilibrium = equilibrium
        self.keep_states = keep_states
        self.theta_bound = theta_uniform_bound(theta0, closure) if 0.0 < closure.alpha < 1.0 else \
            float(np.max(np.abs(theta0.values))) + 2.0 * closure.trace.max_abs()
        self.envelope = theta_envelope(theta0, closure) if 0.0 < closure.alpha < 1.0 else (-math.inf, math.inf)
        self.series: Dict[str, List[float]] = {name: [] for name in CSV_COLUMNS + EXTRA_COLUMNS}
        self.events: List[ViolationEvent] = []
        self._previous: Optional[SimState] = None
        self._previous_truncation: Optional[Tuple[float, float]] = None
        self.tolerance = 10.0 * params.lin_tol

    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.series['t'])

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.series['t'])

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name], dtype=float)

    def duration(self) -> float:
        if not self:
            return 0.0
        return self.series['t'][-1] - self.series['t'][0]

    def counts(self) -> Dict[str, int]:
        return {kind: sum(1 for e in self.events if e.kind == kind) for kind in EVENT_KINDS}

    def _event(self, kind: str, state: SimState, value: float):
        snapshot = state.copy() if self.keep_states else None
        self.events.append(ViolationEvent(kind, state.t, state.step, value, snapshot))
        logger.warning(f"{kind} event at t={state.t:.6g} (step {state.step}): {value:.3e}")

    # ------------------------------------------------------------------

    def record(self, state: SimState, equilibrium: Optional[EquilibriumSolution] = None):
        """
        Append one row for state and flag any violation events

        Args:
            state: Accepted state (times must increase)
            equilibrium: Reference for the relative energy; falls back to the
                one given at construction
        """
        if self and state.t <= self.series['t'][-1]:
            raise ValueError(f"Diagnostics times must increase: {state.t} after {self.series['t'][-1]}")
        eq = equilibrium if equilibrium is not None else self.equilibrium
        grid = state.grid
        closure = self.closure
        theta = state.theta
        calT = to_calT(theta, closure)

        kinetic = state.u.kinetic_energy()
        thermal = lambda_energy(calT.values, grid, closure.alpha)
        t_min, t_max = float(np.min(theta.values)), float(np.max(theta.values))

        ke_res = thermal_res = 0.0
        previous = self._previous
        if previous is not None:
            dt = state.t - previous.t
            ke_res = (kinetic - self.series['KE'][-1]
                      + dt * self.params.mu * velocity_dirichlet_energy(state.u)
                      - dt * buoyancy_work(theta, self.potential, state.u))
            thermal_res = (thermal - self.series['thermal_E'][-1]
                           + dt * self.params.kappa * dirichlet_energy(calT.values, grid)
                           - dt * self._boundary_transport(previous, calT))
            self._check_events(previous, state, ke_res, thermal_res)

        rel = math.nan
        if eq is not None:
            du = state.u - eq.us
            dT = calT.values - eq.calTs.values
            rel = du.kinetic_energy() + lambda_energy(dT, grid, closure.alpha)

        s = self.series
        s['t'].append(state.t)
        s['KE'].append(kinetic)
        s['thermal_E'].append(thermal)
        s['theta_min'].append(t_min)
        s['theta_max'].append(t_max)
        s['theta_bound'].append(self.theta_bound)
        s['div_max'].append(state.divergence_max())
        s['ke_budget_res'].append(ke_res)
        s['thermal_budget_res'].append(thermal_res)
        s['rel_energy'].append(rel)
        s['mean_theta'].append(theta.mean())
        s['step'].append(state.step)
        s['theta_sup'].append(max(t_max, s['theta_sup'][-1]) if s['theta_sup'] else t_max)
        s['theta_inf'].append(min(t_min, s['theta_inf'][-1]) if s['theta_inf'] else t_min)
        s['l2_sum'].append(state.u.l2_norm() + theta.l2_norm())

        if max(abs(t_min), abs(t_max)) > self.theta_bound + self.tolerance:
            self._event('theta_bound', state, max(abs(t_min), abs(t_max)) - self.theta_bound)
        self._previous = state.copy()

    def _boundary_transport(self, previous: SimState, calT: ScalarField) -> float:
        """sum over faces of u . grad(calT) * thetaB, with u from the start of the step"""
        grid = calT.grid
        u = previous.u
        c, b = calT.values, self.closure.thetaB.values
        wx = u.ux[1:-1, :] * (c[1:, :] - c[:-1, :]) / grid.hx * 0.5 * (b[1:, :] + b[:-1, :])
        wy = u.uy[:, 1:-1] * (c[:, 1:] - c[:, :-1]) / grid.hy * 0.5 * (b[:, 1:] + b[:, :-1])
        return float(np.sum(wx) + np.sum(wy)) * grid.cell_area

    def _check_events(self, previous: SimState, state: SimState, ke_res: float, thermal_res: float):
        excess = max_principle_excess(previous.theta, state.theta)
        if excess > self.tolerance:
            self._event('max_principle', state, excess)

        lower, upper = self.envelope
        trace = boundary_value(state.theta, self.closure)
        truncation = truncation_energies(state.theta, upper, lower)
        if self._previous_truncation is None:
            self._previous_truncation = truncation_energies(previous.theta, upper, lower)
        if upper >= trace.max() and lower <= trace.min():
            growth = max(truncation[0] - self._previous_truncation[0],
                         truncation[1] - self._previous_truncation[1])
            if growth > 1e-12:
                self._event('truncation', state, growth)
        self._previous_truncation = truncation

        h = state.grid.h_max
        dt = state.t - previous.t
        scale = max(1.0, self.series['KE'][-1] + self.series['thermal_E'][-1])
        allowance = (h * h + dt * dt) * scale
        if ke_res > allowance:
            self._event('energy_sign', state, ke_res)

    # ------------------------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        """All series, CSV columns first"""
        return pd.DataFrame({name: self.series[name] for name in CSV_COLUMNS + EXTRA_COLUMNS})

    def events_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_dict() for e in self.events], columns=['kind', 't', 'step', 'value'])

    def summary(self) -> Dict:
        frame = self.to_frame()
        return {
            'samples': len(self),
            't_end': self.series['t'][-1] if self else 0.0,
            'theta_abs_max': float(np.max(np.abs(frame[['theta_min', 'theta_max']].values))) if self else 0.0,
            'theta_bound': self.theta_bound,
            'envelope': list(self.envelope),
            'div_max': float(frame['div_max'].max()) if self else 0.0,
            'events': self.counts(),
        }


# =============================================================================
# POST-PROCESSING
# =============================================================================

@dataclass
class DecayFit:
    """Least-squares fit E ~ C exp(-K t)"""

    K: float
    C: float
    r_squared: float
    samples: int
    floor_time: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


def fit_decay_rate(times: Sequence[float], values: Sequence[float], window: Optional[float] = None,
                   noise_floor: float = 0.0) -> DecayFit:
    """
    Fit log E = log C - K t over the trailing time window

    Samples at or below noise_floor end the usable series; the time of the
    first such sample is reported as floor_time. With fewer than 8 usable
    samples left after a floor hit the fit fields are NaN.

    Args:
        times: Sample times
        values: Energies
        window: Length of the trailing time window (whole series when None)
        noise_floor: Energies at or below this value are treated as noise

    Returns:
        DecayFit with rate K (positive for decay), prefactor C and R^2

    Raises:
        ValueError: If fewer than 8 samples fall in the window
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(values, dtype=float)
    floor_time = None
    hits = np.nonzero(~(e > noise_floor))[0]
    if hits.size:
        floor_time = float(t[hits[0]])
        t, e = t[:hits[0]], e[:hits[0]]
    if window is not None and t.size:
        keep = t >= t[-1] - window
        t, e = t[keep], e[keep]
    if t.size < 8:
        if floor_time is not None:
            return DecayFit(math.nan, math.nan, math.nan, int(t.size), floor_time)
        raise ValueError(f"fit_decay_rate needs at least 8 samples in the window, got {t.size}")

    log_e = np.log(e)
    if np.ptp(log_e) == 0.0:
        return DecayFit(0.0, float(e[0]), 1.0, int(t.size), floor_time)
    fit = stats.linregress(t, log_e)
    return DecayFit(float(-fit.slope), float(math.exp(fit.intercept)), float(fit.rvalue ** 2),
                    int(t.size), floor_time)


def ergodic_average(times: Sequence[float], values: Sequence[float]) -> Tuple[np.ndarray, float]:
    """
    Running time average (1/T) int_0^T F dt and its convergence gap

    The gap is the largest oscillation of the running mean over the windows
    [T/4, T/2] and [T/2, T], with T measured from the first sample.

    Raises:
        ValueError: With fewer than 2 samples
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(values, dtype=float)
    if t.size < 2:
        raise ValueError("ergodic_average needs at least 2 samples")
    elapsed = t - t[0]
    integral = cumulative_trapezoid(f, t, initial=0.0)
    running = np.empty_like(f)
    running[0] = f[0]
    running[1:] = integral[1:] / elapsed[1:]

    T = elapsed[-1]
    gap = 0.0
    for lo, hi in ((0.25 * T, 0.5 * T), (0.5 * T, T)):
        part = running[(elapsed >= lo) & (elapsed <= hi)]
        if part.size:
            gap = max(gap, float(np.max(part) - np.min(part)))
    return running, gap


def absorbing_radii(logs: Sequence[DiagnosticsLog], discard_T: float) -> List[float]:
    """
    Per-run sup over t > discard_T of ||u|| + ||Theta||

    Raises:
        ValueError: If a log covers less than 2 * discard_T
    """
    radii = []
    for log in logs:
        if log.duration() < 2.0 * discard_T:
            raise ValueError(f"Log covers t={log.duration():g}, need at least {2.0 * discard_T:g}")
        t = log.times - log.series['t'][0]
        tail = log.column('l2_sum')[t > discard_T]
        radii.append(float(np.max(tail)) if tail.size else 0.0)
    return radii


def absorbing_radius(logs: Sequence[DiagnosticsLog], discard_T: float) -> float:
    """Empirical absorbing radius: the largest tail sup over all runs"""
    radii = absorbing_radii(logs, discard_T)
    return max(radii) if radii else 0.0
