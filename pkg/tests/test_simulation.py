import numpy as np
import pandas as pd
import pytest
from PIL import Image

from core_types import ScalarField, SimState, build_grid
from diagnostics import CSV_COLUMNS
from flow import random_divfree_velocity
from simconfig import ConfigError
from simulation import (EXIT_OK, MAGIC, CheckpointError, Simulation, checkpoint_read, checkpoint_write,
                        quantize_gray, save_snapshot)


def make_state(grid, rng, t=0.25, step=12):
    theta = ScalarField(grid, rng.standard_normal(grid.shape))
    return SimState(t, random_divfree_velocity(grid, 1.0, rng), theta, step)


def test_checkpoint_round_trip_is_bit_exact(tmp_path, rng):
    grid = build_grid(8, 6, 1.0, 0.75)
    state = make_state(grid, rng)
    path = checkpoint_write(state, tmp_path / 'state.bin')
    restored = checkpoint_read(path, grid)
    assert restored.t == state.t and restored.step == state.step
    np.testing.assert_array_equal(restored.theta.values, state.theta.values)
    np.testing.assert_array_equal(restored.u.ux, state.u.ux)
    np.testing.assert_array_equal(restored.u.uy, state.u.uy)
    assert path.read_bytes()[:8] == MAGIC


def test_checkpoint_rejects_bad_files(tmp_path, rng):
    grid = build_grid(8, 8, 1.0, 1.0)
    path = checkpoint_write(make_state(grid, rng), tmp_path / 'state.bin')
    data = path.read_bytes()

    (tmp_path / 'magic.bin').write_bytes(b'NOTACKPT' + data[8:])
    with pytest.raises(CheckpointError):
        checkpoint_read(tmp_path / 'magic.bin')

    (tmp_path / 'short.bin').write_bytes(data[:-8])
    with pytest.raises(CheckpointError):
        checkpoint_read(tmp_path / 'short.bin')

    with pytest.raises(CheckpointError) as info:
        checkpoint_read(path, build_grid(16, 8, 1.0, 1.0))
    assert '8x8' in str(info.value) and '16x8' in str(info.value)

    with pytest.raises(CheckpointError):
        checkpoint_read(tmp_path / 'missing.bin')


def test_quantize_gray_levels():
    values = np.array([0.0, 0.2, 0.6, 0.8, 1.0])
    np.testing.assert_array_equal(quantize_gray(values, 0.0, 1.0), [0, 0, 170, 255, 255])
    assert quantize_gray(np.array([5.0]), 1.0, 1.0)[0] == 255


def test_snapshot_is_written(tmp_path, grid, rng):
    path = save_snapshot(ScalarField(grid, rng.uniform(size=grid.shape)), tmp_path / 'theta.png', 0.0, 1.0)
    with Image.open(path) as image:
        assert image.size == (256, 256)
        assert set(np.unique(np.asarray(image))) <= {0, 85, 170, 255}


def test_initial_state_is_reproducible(small_config):
    a = Simulation(small_config, banner=False).initial_state()
    b = Simulation(small_config, banner=False).initial_state()
    np.testing.assert_array_equal(a.theta.values, b.theta.values)
    np.testing.assert_array_equal(a.u.ux, b.u.ux)
    assert np.max(np.abs(a.theta.values)) <= 0.1
    assert a.divergence_max() <= 1e-10


def test_initial_state_from_checkpoint_restores_time(small_config, tmp_path, rng):
    sim = Simulation(small_config, banner=False)
    path = checkpoint_write(make_state(sim.grid, rng, t=0.5, step=40), tmp_path / 'restart.bin')
    config = small_config.with_changes(initial={'theta0_spec': f'file({path})', 'u0_spec': f'file({path})'})
    state = Simulation(config, banner=False).initial_state()
    assert state.t == 0.5 and state.step == 40


def test_equilibrium_initial_needs_alignment(small_config):
    config = small_config.with_changes(physics={'thetaB_spec': 'cosine_x(1)'},
                                       initial={'theta0_spec': 'equilibrium'})
    with pytest.raises(ConfigError):
        Simulation(config, banner=False).initial_state()


def test_perturbed_initial_keeps_equilibrium_wall_value(small_config):
    config = small_config.with_changes(initial={'theta0_spec': 'perturbed(0.2)', 'u0_spec': 'zero'})
    sim = Simulation(config, banner=False)
    state = sim.initial_state()
    eq = sim.equilibrium(steady=False)
    assert state.theta.mean() == pytest.approx(eq.thetas.mean(), abs=1e-12)
    assert state.theta.trace.max_deviation(eq.thetas.trace) <= 1e-12
    deviation = state.theta.values - eq.thetas.values
    assert np.max(np.abs(deviation)) == pytest.approx(0.2, rel=0.1)
    assert max(state.u.max_abs()) == 0.0


def test_perturbed_initial_needs_alignment(small_config):
    config = small_config.with_changes(physics={'thetaB_spec': 'cosine_x(1)'},
                                       initial={'theta0_spec': 'perturbed(0.1)'})
    with pytest.raises(ConfigError):
        Simulation(config, banner=False).initial_state()


def test_run_writes_outputs(small_config):
    config = small_config.with_changes(run={'snapshot_every': 5, 'checkpoint_every': 5})
    sim = Simulation(config)
    assert sim.run() == EXIT_OK
    out = config.out_dir
    with open(out / 'diagnostics.csv') as f:
        header = f.readline()
    assert header.startswith('# prng=PCG64 numpy=')
    assert header.strip().endswith('seed=1')
    frame = pd.read_csv(out / 'diagnostics.csv', comment='#')
    assert list(frame.columns) == CSV_COLUMNS
    assert frame['t'].iloc[-1] == pytest.approx(config.run.t_end)
    assert frame['div_max'].max() <= 10.0 * config.numerics.lin_tol
    assert (frame['rel_energy'].diff().iloc[2:] <= 1e-12).all()
    assert (out / 'violations.csv').exists()
    assert (out / 'checkpoint_final.bin').exists()
    assert list(out.glob('theta_*.png'))
    assert list(out.glob('checkpoint_0*.bin'))
    final = checkpoint_read(out / 'checkpoint_final.bin', sim.grid)
    assert final.t == pytest.approx(config.run.t_end)


def test_repeated_runs_are_byte_identical(small_config, tmp_path):
    outputs = []
    for name in ('first', 'second'):
        out = tmp_path / name
        assert Simulation(small_config, output_dir=out, banner=False).run() == EXIT_OK
        outputs.append(out)
    first, second = outputs
    for filename in ('diagnostics.csv', 'violations.csv', 'checkpoint_final.bin'):
        assert (first / filename).read_bytes() == (second / filename).read_bytes()


def test_stability_report(small_config):
    result = Simulation(small_config, banner=False).stability()
    assert result['aligned'] and result['satisfied']
    assert result['smallness_margin'] > 0.0
    assert result['rate_bound'] == pytest.approx(2.0 * result['smallness_margin'])


def test_write_equilibrium(small_config):
    sim = Simulation(small_config, banner=False)
    eq, path = sim.write_equilibrium()
    stored = checkpoint_read(path, sim.grid)
    np.testing.assert_array_equal(stored.theta.values, eq.thetas.values)
