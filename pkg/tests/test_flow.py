import numpy as np
import pytest

from core_types import Params, ScalarField, SimState, VectorField
from elliptic import poincare_constant
from equilibrium import aligned_equilibrium
from nonlocal_bc import boundary_value, build_closure
from flow import (NonFiniteStateError, buoyancy_force, check_finite, compute_dt, eigenmode_velocity, full_step,
                  momentum_advection, momentum_step, potential_for, project, random_divfree_velocity,
                  velocity_dirichlet_energy)


def test_random_divfree_velocity(grid, rng):
    u = random_divfree_velocity(grid, 2.0, rng)
    assert np.max(np.abs(u.divergence())) <= 1e-10
    assert max(u.max_abs()) == pytest.approx(2.0)


def test_random_divfree_velocity_is_seeded(grid):
    a = random_divfree_velocity(grid, 1.0, np.random.default_rng(5))
    b = random_divfree_velocity(grid, 1.0, np.random.default_rng(5))
    np.testing.assert_array_equal(a.ux, b.ux)
    np.testing.assert_array_equal(a.uy, b.uy)


def test_zero_amplitude_gives_rest(grid, rng):
    u = random_divfree_velocity(grid, 0.0, rng)
    assert max(u.max_abs()) == 0.0


def test_projection_removes_divergence(grid, rng):
    u = VectorField(grid, rng.standard_normal((grid.nx + 1, grid.ny)), rng.standard_normal((grid.nx, grid.ny + 1)))
    projected, phi = project(u, 0.01, 1e-10)
    assert np.max(np.abs(projected.divergence())) <= 1e-9
    assert phi.mean() == pytest.approx(0.0, abs=1e-12)
    assert projected.kinetic_energy() <= u.kinetic_energy()


def test_projection_keeps_divergence_free_fields(grid, rng):
    u = random_divfree_velocity(grid, 1.0, rng)
    projected, _ = project(u, 0.01, 1e-10)
    np.testing.assert_allclose(projected.ux, u.ux, atol=1e-9)


def test_gradient_buoyancy_is_absorbed_by_pressure(grid, params):
    G = potential_for(grid, 'linear_y(-1)')
    state = SimState(0.0, VectorField.zeros(grid), ScalarField.constant(grid, 1.0))
    u, phi = momentum_step(state, params, 0.01, G)
    assert max(u.max_abs()) <= 1e-8
    assert np.max(np.abs(phi.values)) > 0.0


def test_buoyancy_has_no_wall_normal_component(grid, rng):
    G = potential_for(grid, 'linear_y(-1)')
    force = buoyancy_force(ScalarField(grid, rng.uniform(size=grid.shape)), G)
    assert not np.any(force.uy[:, 0]) and not np.any(force.uy[:, -1])
    assert not np.any(force.ux)


def test_momentum_advection_vanishes_at_rest(grid):
    ax, ay = momentum_advection(VectorField.zeros(grid))
    assert ax.shape == (grid.nx - 1, grid.ny) and ay.shape == (grid.nx, grid.ny - 1)
    assert not np.any(ax) and not np.any(ay)


def test_velocity_dirichlet_energy_satisfies_poincare(grid):
    u = eigenmode_velocity(grid, 1.0)
    assert velocity_dirichlet_energy(u) >= poincare_constant(grid) ** 2 * 2.0 * u.kinetic_energy() * (1 - 1e-9)


def test_compute_dt_uses_velocity(grid, params):
    rest = SimState(0.0, VectorField.zeros(grid), ScalarField.zeros(grid))
    assert compute_dt(rest, params) == pytest.approx(params.dt_cfl * params.dt_max)


def test_aligned_equilibrium_is_a_fixed_point(grid, params, aligned_closure):
    eq = aligned_equilibrium(grid, aligned_closure)
    state = full_step(eq.state(), aligned_closure, params)
    assert state.step == 1
    assert max(state.u.max_abs()) <= 1e-7
    np.testing.assert_allclose(state.theta.values, eq.thetas.values, atol=1e-8)


@pytest.mark.parametrize('alpha', [0.1, 0.5, 0.9])
def test_constant_wall_data_keep_constant_state(grid, alpha):
    b = 0.6
    closure = build_closure(grid, f'constant({b})', alpha)
    params = Params(mu=1.0, kappa=1.0, alpha=alpha, thetaB_spec=f'constant({b})')
    theta = ScalarField.constant(grid, b / (1.0 + alpha))
    theta.trace = boundary_value(theta, closure)
    state = SimState(0.0, VectorField.zeros(grid), theta)
    for _ in range(5):
        state = full_step(state, closure, params)
    np.testing.assert_allclose(state.theta.values, b / (1.0 + alpha), atol=1e-9)
    assert max(state.u.max_abs()) <= 1e-8


def test_full_step_keeps_divergence_small(grid, params, cosine_closure, rng):
    u = random_divfree_velocity(grid, 1.0, rng)
    theta = ScalarField(grid, rng.uniform(-1.0, 1.0, grid.shape))
    state = SimState(0.0, u, theta)
    for _ in range(3):
        state = full_step(state, cosine_closure, params)
    assert state.divergence_max() <= 10.0 * params.lin_tol
    assert state.t > 0.0


def test_check_finite_names_array(grid):
    theta = ScalarField(grid, np.zeros(grid.shape))
    theta.values[3, 3] = np.nan
    with pytest.raises(NonFiniteStateError) as info:
        check_finite(SimState(0.5, VectorField.zeros(grid), theta, 7))
    assert info.value.array == 'theta'
