"""
Base Verification Suite System
Abstract base class for property verification suites, their report
record and the registry that loads them by name
"""

import importlib
import json
import logging
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from core_types import ObrbError, SimState
from diagnostics import DiagnosticsLog
from equilibrium import EquilibriumSolution
from simconfig import RunConfig
from simulation import Simulation, checkpoint_write, integrate

logger = logging.getLogger(__name__)

# Suite name -> class path
SUITES = {
    'maxprinciple': 'suites.maxprinciple.MaxPrincipleSuite',
    'bounds': 'suites.bounds.BoundsSuite',
    'dissipativity': 'suites.dissipativity.DissipativitySuite',
    'ergodic': 'suites.ergodic.ErgodicSuite',
    'stability': 'suites.stability.StabilitySuite',
    'rayleigh': 'suites.rayleigh.RayleighSuite',
    'uniqueness': 'suites.uniqueness.UniquenessSuite',
    'budget': 'suites.budget.BudgetSuite',
}


class SuiteError(ObrbError):
    """Exception raised for unknown suites or ensembles that cannot be set up"""
    pass


@dataclass
class SuiteReport:
    """Machine-readable verdict of one suite"""

    suite: str
    passed: bool = True
    checks: List[Dict[str, Any]] = field(default_factory=list)
    violations: Dict[str, int] = field(default_factory=dict)
    counterexample: Optional[str] = None
    elapsed: float = 0.0

    def to_dict(self) -> Dict:
        """Convert to dictionary for JSON serialization"""
        return {
            'suite': self.suite,
            'passed': self.passed,
            'checks': self.checks,
            'violations': self.violations,
            'counterexample': self.counterexample,
            'elapsed': round(self.elapsed, 3),
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, default=float)
        return path


@dataclass
class MemberResult:
    """Outcome of one ensemble member"""

    label: str
    sim: Simulation
    log: DiagnosticsLog
    state: SimState
    error: Optional[str] = None


class VerificationSuite(ABC):
    """
    Abstract base class for verification suites

    Subclasses define NAME, DESCRIPTION and DEFAULTS and implement evaluate(),
    which runs the ensemble and records checks through self.check().
    """

    NAME = 'suite'
    DESCRIPTION = 'No description'
    VERSION = '1.0.0'
    DEFAULTS: Dict[str, Any] = {}

    def __init__(self, config: RunConfig, options: Optional[Dict[str, Any]] = None,
                 output_dir: Optional[Path] = None):
        """
        Initialize suite

        Args:
            config: Base run configuration; members derive from it
            options: Overrides for the suite's DEFAULTS
            output_dir: Directory for member outputs and counterexamples
        """
        self.config = config
        self.options = {'workers': 4, **self.DEFAULTS, **(options or {})}
        self.output_dir = Path(output_dir) if output_dir is not None else config.out_dir / f"verify_{self.NAME}"
        self.logger = logging.getLogger(self.__class__.__name__)
        self.report = SuiteReport(self.NAME)

    def get_name(self) -> str:
        return self.NAME

    def get_description(self) -> str:
        return self.DESCRIPTION

    def get_info(self) -> Dict[str, Any]:
        return {
            'name': self.get_name(),
            'version': self.VERSION,
            'description': self.get_description(),
            'options': self.options,
        }

    @abstractmethod
    def evaluate(self):
        """Run the ensemble and record checks"""
        pass

    def run(self) -> SuiteReport:
        """
        Evaluate the suite and return its report

        Solver failures inside evaluate() fail the suite instead of propagating.
        """
        self.logger.info("=" * 70)
        self.logger.info(f"Verification suite: {self.NAME} - {self.DESCRIPTION}")
        self.logger.info("=" * 70)
        start = time.monotonic()
        try:
            self.evaluate()
        except ObrbError as e:
            self.logger.error(f"Suite {self.NAME} aborted: {e}")
            self.check('completed', False, error=str(e))
        self.report.elapsed = time.monotonic() - start
        verdict = "PASS" if self.report.passed else "FAIL"
        self.logger.info(f"Suite {self.NAME}: {verdict} ({len(self.report.checks)} checks, "
                         f"{self.report.elapsed:.1f}s)")
        return self.report

    # ------------------------------------------------------------------
    # Helpers for subclasses
    # ------------------------------------------------------------------

    def check(self, name: str, passed: bool, counterexample: Optional[SimState] = None,
              label: str = '', **measured) -> bool:
        """Record one assertion; the first failing one with a state leaves a checkpoint"""
        passed = bool(passed)
        entry = {'name': name, 'passed': passed}
        entry.update(measured)
        self.report.checks.append(entry)
        if not passed:
            self.report.passed = False
            self.logger.warning(f"Check failed: {name} {measured}")
            if counterexample is not None and self.report.counterexample is None:
                path = checkpoint_write(counterexample,
                                        self.output_dir / f"counterexample_{label or name}.bin")
                self.report.counterexample = str(path)
        else:
            self.logger.info(f"Check passed: {name}")
        return passed

    def add_violations(self, log: DiagnosticsLog):
        for kind, count in log.counts().items():
            self.report.violations[kind] = self.report.violations.get(kind, 0) + count

    def member_config(self, **sections) -> RunConfig:
        return self.config.with_changes(**sections)

    def run_member(self, label: str, config: RunConfig, t_end: Optional[float] = None,
                   equilibrium: Optional[EquilibriumSolution] = None) -> MemberResult:
        """Integrate one configuration, recording diagnostics at every step"""
        sim = Simulation(config, self.output_dir / label, banner=False)
        state = sim.initial_state()
        log = DiagnosticsLog(sim.closure, sim.params, sim.potential, state.theta, equilibrium)
        log.record(state)
        error = None
        latest = [state]
        try:
            integrate(state, sim.closure, sim.params, sim.potential,
                      t_end if t_end is not None else config.run.t_end, log,
                      on_step=lambda s: latest.__setitem__(0, s))
        except ObrbError as e:
            error = str(e)
            self.logger.error(f"[{label}] {e}")
        self.logger.info(f"[{label}] done: t={latest[0].t:.4g}, events {log.counts()}")
        return MemberResult(label, sim, log, latest[0], error)

    def run_ensemble(self, jobs: Sequence[Tuple[str, Callable[[], Any]]]) -> List[Any]:
        """Run independent jobs concurrently; results keep the order of jobs"""
        workers = max(1, int(self.options['workers']))
        if workers == 1 or len(jobs) == 1:
            return [job() for _, job in jobs]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job) for _, job in jobs]
            return [f.result() for f in futures]

    def check_member_errors(self, results: Sequence[MemberResult]) -> bool:
        failed = [r for r in results if r.error]
        return self.check('members_completed', not failed,
                          counterexample=failed[0].state if failed else None,
                          label=failed[0].label if failed else '',
                          failures=[f"{r.label}: {r.error}" for r in failed])


class SuiteRegistry:
    """
    Registry for verification suites

    Maps names to suite classes, loaded lazily from their class paths
    """

    def __init__(self, paths: Optional[Dict[str, str]] = None):
        self.paths = dict(SUITES if paths is None else paths)
        self.suites: Dict[str, type] = {}
        self.logger = logging.getLogger('SuiteRegistry')

    def register(self, name: str, suite_cls: type):
        """Register a suite class under a name"""
        if name in self.suites:
            self.logger.warning(f"Suite '{name}' already registered, replacing...")
        self.suites[name] = suite_cls
        self.logger.debug(f"Registered suite: {name} ({suite_cls.__name__})")

    def unregister(self, name: str):
        self.suites.pop(name, None)
        self.paths.pop(name, None)

    def get(self, name: str) -> type:
        """
        Get a suite class by name, importing it on first use

        Raises:
            SuiteError: If the name is unknown or its module cannot be loaded
        """
        if name in self.suites:
            return self.suites[name]
        if name not in self.paths:
            raise SuiteError(f"Unknown suite '{name}' (available: {', '.join(self.names())})")
        try:
            module_path, class_name = self.paths[name].rsplit('.', 1)
            module = importlib.import_module(module_path)
            suite_cls = getattr(module, class_name)
        except (ImportError, AttributeError) as e:
            raise SuiteError(f"Failed to load suite {name}: {e}")
        self.register(name, suite_cls)
        return suite_cls

    def names(self) -> List[str]:
        return sorted(set(self.paths) | set(self.suites))

    def list_suites(self) -> Dict[str, str]:
        return {name: self.get(name).DESCRIPTION for name in self.names()}

    def create(self, name: str, config: RunConfig, options: Optional[Dict[str, Any]] = None,
               output_dir: Optional[Path] = None) -> VerificationSuite:
        return self.get(name)(config, options, output_dir)
