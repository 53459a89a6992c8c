"""Shared fixtures: small grids and configurations so the suite runs in seconds"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core_types import Params, build_grid
from nonlocal_bc import build_closure
from simconfig import config_from_blocks


@pytest.fixture
def grid():
    return build_grid(16, 16, 1.0, 1.0)


@pytest.fixture
def params():
    return Params(mu=1.0, kappa=1.0, alpha=0.5, g_spec='linear_y(-1)', thetaB_spec='affine(1, 0, -1)')


@pytest.fixture
def aligned_closure(grid):
    return build_closure(grid, 'affine(1, 0, -1)', 0.5)


@pytest.fixture
def cosine_closure(grid):
    return build_closure(grid, 'cosine_x(1)', 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1)


@pytest.fixture
def blocks(tmp_path):
    return {
        'grid': {'nx': 12, 'ny': 12},
        'physics': {'mu': 1.0, 'kappa': 1.0, 'alpha': 0.5, 'thetaB_spec': 'affine(1, 0, -1)'},
        'numerics': {},
        'run': {'t_end': 0.1, 'output_every': 2, 'seed': 1, 'out_dir': str(tmp_path / 'out')},
        'initial': {'theta0_spec': 'random(0.1)', 'u0_spec': 'random_divfree(0.1)'},
    }


@pytest.fixture
def small_config(blocks):
    return config_from_blocks(blocks, source='test')
