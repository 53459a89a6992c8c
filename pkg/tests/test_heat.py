import numpy as np
import pytest

from core_types import Params, ScalarField, SimState, VectorField
from diagnostics import fit_decay_rate
from elliptic import poincare_constant
from flow import eigenmode_velocity, random_divfree_velocity
from heat import (CFLViolationError, advect_temperature, advective_dt, diffuse_temperature, envelope,
                  frozen_velocity_contraction, max_principle_excess, temperature_step)
from nonlocal_bc import boundary_value, build_closure


def random_theta(grid, rng, closure, low=-1.0, high=1.0):
    theta = ScalarField(grid, rng.uniform(low, high, grid.shape))
    theta.trace = boundary_value(theta, closure)
    return theta


def test_advective_dt_at_rest_and_in_motion(grid):
    assert advective_dt(VectorField.zeros(grid), 0.5, 0.02) == pytest.approx(0.01)
    fast = eigenmode_velocity(grid, 10.0)
    slow = eigenmode_velocity(grid, 1.0)
    assert advective_dt(fast, 0.5, 0.02) <= advective_dt(slow, 0.5, 0.02)


def test_advection_rejects_cfl_violation(grid, rng):
    u = eigenmode_velocity(grid, 1.0)
    theta = ScalarField(grid, rng.uniform(size=grid.shape))
    with pytest.raises(CFLViolationError) as info:
        advect_temperature(theta, u, 10.0)
    assert info.value.courant > 1.0


@pytest.mark.parametrize('limited', [False, True])
def test_advection_preserves_constants(grid, rng, limited):
    u = random_divfree_velocity(grid, 1.0, rng)
    theta = ScalarField.constant(grid, 0.7)
    dt = advective_dt(u, 0.9, 1.0)
    moved = advect_temperature(theta, u, dt, limited=limited)
    np.testing.assert_allclose(moved.values, 0.7, atol=1e-12)


def test_advection_conserves_total_heat(grid, rng):
    u = random_divfree_velocity(grid, 1.0, rng)
    theta = ScalarField(grid, rng.uniform(size=grid.shape))
    moved = advect_temperature(theta, u, advective_dt(u, 0.5, 1.0))
    assert moved.values.sum() == pytest.approx(theta.values.sum(), rel=1e-12)


def test_implicit_diffusion_honours_nonlocal_trace(grid, rng, cosine_closure):
    theta = random_theta(grid, rng, cosine_closure)
    result = diffuse_temperature(theta, cosine_closure, 1.0, 0.01, 1e-11)
    assert result.trace.max_deviation(boundary_value(result, cosine_closure)) <= 1e-9


def test_lagged_diffusion_uses_previous_mean(grid, rng, cosine_closure):
    theta = random_theta(grid, rng, cosine_closure)
    result = diffuse_temperature(theta, cosine_closure, 1.0, 0.01, 1e-11, coupling='lagged', theta_prev=theta)
    assert result.trace.max_deviation(boundary_value(theta, cosine_closure)) == 0.0
    with pytest.raises(ValueError):
        diffuse_temperature(theta, cosine_closure, 1.0, 0.01, 1e-11, coupling='explicit')


@pytest.mark.parametrize('alpha', [0.1, 0.5, 0.9])
def test_temperature_step_obeys_maximum_principle(grid, rng, alpha):
    closure = build_closure(grid, 'cosine_x(1)', alpha)
    params = Params(mu=1.0, kappa=0.1, alpha=alpha, lin_tol=1e-11)
    u = random_divfree_velocity(grid, 1.0, rng)
    theta = random_theta(grid, rng, closure)
    dt = advective_dt(u, params.dt_cfl, params.dt_max)
    for step in range(5):
        new = temperature_step(SimState(step * dt, u, theta, step), closure, params, dt)
        assert max_principle_excess(theta, new) <= 1e-9
        theta = new


def test_mean_decays_without_boundary_heat(grid, rng):
    closure = build_closure(grid, 'constant(0)', 0.5)
    params = Params(mu=1.0, kappa=1.0, alpha=0.5)
    theta = random_theta(grid, rng, closure, 0.0, 1.0)
    u = VectorField.zeros(grid)
    means = [theta.mean()]
    for step in range(20):
        theta = temperature_step(SimState(step * 0.01, u, theta, step), closure, params, 0.01)
        means.append(theta.mean())
    assert all(b < a for a, b in zip(means, means[1:]))
    assert means[-1] > 0.0


def test_envelope_includes_new_trace(grid, aligned_closure):
    theta = ScalarField.constant(grid, 0.2)
    lower, upper = envelope(theta, aligned_closure.trace)
    assert lower == pytest.approx(0.0)
    assert upper == pytest.approx(1.0)


def test_contraction_of_identical_data_is_zero(grid, rng, cosine_closure):
    params = Params(mu=1.0, kappa=1.0, alpha=0.5)
    theta = random_theta(grid, rng, cosine_closure)
    report = frozen_velocity_contraction(theta, theta.copy(), eigenmode_velocity(grid, 1.0),
                                         cosine_closure, params, 0.1)
    assert max(report.energies) == 0.0
    assert report.monotone


def test_contraction_eigenmode_rate(grid, cosine_closure):
    params = Params(mu=1.0, kappa=1.0, alpha=0.5)
    X, Y = grid.centers()
    mode = ScalarField(grid, np.sin(np.pi * X) * np.sin(np.pi * Y))
    report = frozen_velocity_contraction(mode, ScalarField.zeros(grid), None,
                                         cosine_closure.with_alpha(0.0), params, 0.5)
    fit = fit_decay_rate(report.times, report.energies)
    expected = 2.0 * params.kappa * poincare_constant(grid) ** 2
    assert report.monotone
    assert fit.K == pytest.approx(expected, rel=0.05)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-6)


def test_contraction_with_swirl_is_monotone(grid, rng, cosine_closure):
    params = Params(mu=1.0, kappa=1.0, alpha=0.5)
    report = frozen_velocity_contraction(random_theta(grid, rng, cosine_closure),
                                         random_theta(grid, rng, cosine_closure),
                                         eigenmode_velocity(grid, 1.0), cosine_closure, params, 0.5)
    assert report.monotone
    assert report.energies[-1] < report.energies[0]
