"""
Run Configuration
Parsing and validation of the line-oriented run files and of the Python
configuration module, both producing one RunConfig.
"""

import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from core_types import (Grid, ObrbError, Params, ParamsError, SpecError, boundary_form, build_grid,
                        make_potential, parse_field_spec)

logger = logging.getLogger(__name__)

REQUIRED = object()

# section -> key -> (type, default)
SCHEMA: Dict[str, Dict[str, Tuple[type, Any]]] = {
    'grid': {
        'nx': (int, REQUIRED),
        'ny': (int, REQUIRED),
        'lx': (float, 1.0),
        'ly': (float, 1.0),
    },
    'physics': {
        'mu': (float, REQUIRED),
        'kappa': (float, REQUIRED),
        'alpha': (float, None),
        'gamma': (float, None),
        'g_spec': (str, 'linear_y(-1)'),
        'thetaB_spec': (str, 'constant(0)'),
    },
    'numerics': {
        'dt_cfl': (float, 0.5),
        'dt_max': (float, 0.02),
        'lin_tol': (float, 1e-10),
        'bc_coupling': (str, 'implicit'),
        'advection': (str, 'upwind'),
    },
    'run': {
        't_end': (float, REQUIRED),
        'output_every': (int, 10),
        'checkpoint_every': (int, 0),
        'snapshot_every': (int, 0),
        'seed': (int, 0),
        'out_dir': (str, 'output'),
    },
    'initial': {
        'theta0_spec': (str, 'zero'),
        'u0_spec': (str, 'zero'),
    },
}

THETA0_KINDS = ('zero', 'constant', 'random', 'eigenmode', 'equilibrium', 'perturbed', 'file')
U0_KINDS = ('zero', 'random_divfree', 'eigenmode', 'file')


class ConfigError(ObrbError, ValueError):
    """Raised for malformed or invalid run configuration; carries the line number when known"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class GridBlock:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0


@dataclass
class PhysicsBlock:
    mu: float
    kappa: float
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    g_spec: str = 'linear_y(-1)'
    thetaB_spec: str = 'constant(0)'


@dataclass
class NumericsBlock:
    dt_cfl: float = 0.5
    dt_max: float = 0.02
    lin_tol: float = 1e-10
    bc_coupling: str = 'implicit'
    advection: str = 'upwind'


@dataclass
class RunBlock:
    t_end: float
    output_every: int = 10
    checkpoint_every: int = 0
    snapshot_every: int = 0
    seed: int = 0
    out_dir: str = 'output'


@dataclass
class InitialBlock:
    theta0_spec: str = 'zero'
    u0_spec: str = 'zero'


@dataclass
class RunConfig:
    """Validated run description"""

    grid: GridBlock
    physics: PhysicsBlock
    numerics: NumericsBlock = field(default_factory=NumericsBlock)
    run: RunBlock = field(default_factory=lambda: RunBlock(t_end=1.0))
    initial: InitialBlock = field(default_factory=InitialBlock)
    source: str = '<memory>'

    def build_grid(self) -> Grid:
        return build_grid(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)

    def params(self) -> Params:
        return Params(mu=self.physics.mu, kappa=self.physics.kappa, alpha=self.physics.alpha,
                      gamma=self.physics.gamma, g_spec=self.physics.g_spec,
                      thetaB_spec=self.physics.thetaB_spec, dt_cfl=self.numerics.dt_cfl,
                      dt_max=self.numerics.dt_max, lin_tol=self.numerics.lin_tol, seed=self.run.seed,
                      bc_coupling=self.numerics.bc_coupling, advection=self.numerics.advection)

    @property
    def out_dir(self) -> Path:
        return Path(self.run.out_dir)

    def to_blocks(self) -> Dict[str, Dict[str, Any]]:
        return {name: asdict(getattr(self, name)) for name in SCHEMA}

    def with_changes(self, **sections) -> 'RunConfig':
        """
        Copy with per-section overrides, e.g. with_changes(run={'t_end': 5})

        The result is validated again.
        """
        blocks = self.to_blocks()
        for name, overrides in sections.items():
            if name not in blocks:
                raise ConfigError(f"Unknown section [{name}]")
            blocks[name].update(overrides)
            if name == 'physics' and 'gamma' in overrides and 'alpha' not in overrides:
                blocks[name]['alpha'] = None
            elif name == 'physics' and 'alpha' in overrides and 'gamma' not in overrides:
                blocks[name]['gamma'] = None
        return config_from_blocks(blocks, source=self.source)

    def describe(self) -> str:
        p = self.physics
        coupling = f"alpha={p.alpha}" if p.alpha is not None else f"gamma={p.gamma}"
        return (f"grid {self.grid.nx}x{self.grid.ny} on [0,{self.grid.lx:g}]x[0,{self.grid.ly:g}], "
                f"mu={p.mu}, kappa={p.kappa}, {coupling}, G={p.g_spec}, thetaB={p.thetaB_spec}, "
                f"t_end={self.run.t_end}")


# =============================================================================
# PARSING
# =============================================================================

def _convert(section: str, key: str, raw: Any, line: Optional[int]):
    kind = SCHEMA[section][key][0]
    if raw is None:
        return None
    try:
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw) if not isinstance(raw, str) else int(raw.strip())
        if kind is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        name = {int: 'an integer', float: 'a number'}.get(kind, 'text')
        raise ConfigError(f"[{section}] {key} expects {name}, got {raw!r}", line)


def parse_config(text: str, source: str = '<text>') -> RunConfig:
    """
    Parse the line-oriented run file grammar

    [section] headers, key = value lines, '#' comments (inline allowed).

    Args:
        text: File contents
        source: Name used in log messages

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: Naming the offending line for syntax, unknown keys,
            type mismatches and constraint violations
    """
    blocks: Dict[str, Dict[str, Any]] = {}
    lines: Dict[Tuple[str, str], int] = {}
    section = None

    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('['):
            if not line.endswith(']'):
                raise ConfigError(f"Malformed section header {raw_line.strip()!r}", number)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"Unknown section [{section}] (expected one of {', '.join(SCHEMA)})", number)
            blocks.setdefault(section, {})
            continue
        if '=' not in line:
            raise ConfigError(f"Expected 'key = value', got {raw_line.strip()!r}", number)
        if section is None:
            raise ConfigError("Key outside of any [section]", number)
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"Unknown key {key!r} in [{section}]", number)
        if key in blocks[section]:
            raise ConfigError(f"Duplicate key {key!r} in [{section}]", number)
        if not value:
            raise ConfigError(f"Empty value for {key!r}", number)
        blocks[section][key] = _convert(section, key, value, number)
        lines[(section, key)] = number

    config = config_from_blocks(blocks, source=source, lines=lines)
    logger.debug(f"Parsed {source}: {config.describe()}")
    return config


def load_config(path) -> RunConfig:
    """Read and parse a run file"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    return parse_config(text, source=str(path))


def config_from_blocks(blocks: Dict[str, Dict[str, Any]], source: str = '<module>',
                       lines: Optional[Dict[Tuple[str, str], int]] = None) -> RunConfig:
    """
    Validate per-section dictionaries into a RunConfig

    Args:
        blocks: {'grid': {...}, 'physics': {...}, ...}
        source: Name used in messages
        lines: Optional (section, key) -> line number map for error messages

    Raises:
        ConfigError: For missing keys, unknown keys or constraint violations
    """
    lines = lines or {}

    def where(section, key):
        return lines.get((section, key))

    values: Dict[str, Dict[str, Any]] = {}
    for section, schema in SCHEMA.items():
        given = dict(blocks.get(section) or {})
        for key in given:
            if key not in schema:
                raise ConfigError(f"Unknown key {key!r} in [{section}]", where(section, key))
        resolved = {}
        for key, (_, default) in schema.items():
            if key in given and given[key] is not None:
                resolved[key] = _convert(section, key, given[key], where(section, key))
            elif default is REQUIRED:
                raise ConfigError(f"Missing required key [{section}] {key} in {source}")
            else:
                resolved[key] = default
        values[section] = resolved
    for section in blocks:
        if section not in SCHEMA:
            raise ConfigError(f"Unknown section [{section}]")

    physics = values['physics']
    if physics['alpha'] is not None and physics['gamma'] is not None:
        raise ConfigError("Give exactly one of alpha and gamma, not both",
                          max(where('physics', 'alpha') or 0, where('physics', 'gamma') or 0) or None)
    if physics['alpha'] is None and physics['gamma'] is None:
        raise ConfigError(f"Missing [physics] alpha or gamma in {source}")

    config = RunConfig(
        grid=GridBlock(**values['grid']),
        physics=PhysicsBlock(**values['physics']),
        numerics=NumericsBlock(**values['numerics']),
        run=RunBlock(**values['run']),
        initial=InitialBlock(**values['initial']),
        source=source,
    )
    _validate(config, where)
    return config


def _validate(config: RunConfig, where):
    try:
        grid = config.build_grid()
    except ObrbError as e:
        raise ConfigError(str(e), where('grid', 'nx'))

    physics = config.physics
    key = 'alpha' if physics.alpha is not None else 'gamma'
    try:
        params = config.params()
    except ParamsError as e:
        name = e.field or key
        section = 'numerics' if name in SCHEMA['numerics'] else 'physics'
        raise ConfigError(str(e), where(section, name))

    try:
        make_potential(grid, params.g_spec)
    except SpecError as e:
        raise ConfigError(str(e), where('physics', 'g_spec'))
    try:
        boundary_form(grid, params.thetaB_spec)
    except SpecError as e:
        raise ConfigError(str(e), where('physics', 'thetaB_spec'))

    run = config.run
    if not run.t_end > 0:
        raise ConfigError(f"t_end must be positive, got {run.t_end}", where('run', 't_end'))
    if not run.output_every > 0:
        raise ConfigError(f"output_every must be positive, got {run.output_every}", where('run', 'output_every'))
    for name in ('checkpoint_every', 'snapshot_every'):
        if getattr(run, name) < 0:
            raise ConfigError(f"{name} must be zero (off) or positive", where('run', name))

    for key, kinds in (('theta0_spec', THETA0_KINDS), ('u0_spec', U0_KINDS)):
        try:
            spec = parse_field_spec(getattr(config.initial, key))
        except SpecError as e:
            raise ConfigError(str(e), where('initial', key))
        if spec.name not in kinds:
            raise ConfigError(f"Unknown {key} {spec.name!r} (expected one of {', '.join(kinds)})",
                              where('initial', key))
        if spec.name == 'file' and not spec.args:
            raise ConfigError(f"{key} file(...) needs a checkpoint path", where('initial', key))
