import math

import numpy as np
import pytest

from core_types import SimState, ScalarField, VectorField
from elliptic import apply_laplacian, poincare_constant
from equilibrium import (NotAlignedError, SteadyStateError, aligned_equilibrium, alignment_defect,
                         certified_decay_rate, is_aligned, smallness_margin, stability_check, steady_solve,
                         velocity_gradient_sup)
from flow import eigenmode_velocity, potential_for
from nonlocal_bc import boundary_value, build_closure


def test_aligned_equilibrium_closed_form(grid, aligned_closure):
    eq = aligned_equilibrium(grid, aligned_closure)
    # mean of the extension is 1/2, shifted by -alpha/(1+alpha) * 1/2
    assert eq.thetas.mean() == pytest.approx(1.0 / 3.0)
    assert max(eq.us.max_abs()) == 0.0
    assert eq.residual <= 1e-9
    assert eq.thetas.trace.max_deviation(boundary_value(eq.thetas, aligned_closure)) <= 1e-14
    assert eq.calTs.trace.max_abs() <= 1e-14
    np.testing.assert_allclose(apply_laplacian(eq.thetas), 0.0, atol=1e-9)


def test_aligned_equilibrium_other_alpha(grid, aligned_closure):
    eq = aligned_equilibrium(grid, aligned_closure, alpha=0.9)
    assert eq.thetas.mean() == pytest.approx(0.5 - 0.9 * 0.5 / 1.9)


def test_non_aligned_data_rejected(grid, cosine_closure):
    G = potential_for(grid, 'linear_y(-1)')
    assert not is_aligned(cosine_closure, G)
    assert alignment_defect(cosine_closure, G) > 0.1
    with pytest.raises(NotAlignedError):
        aligned_equilibrium(grid, cosine_closure, potential=G)


def test_stability_check_aligned_example(grid, params, aligned_closure):
    G = potential_for(grid, 'linear_y(-1)')
    report = stability_check(grid, aligned_closure, G, params)
    assert report.lhs == pytest.approx(1.0)
    assert report.rhs == pytest.approx(poincare_constant(grid) ** 2)
    assert report.rhs == pytest.approx(2.0 * math.pi ** 2, rel=0.01)
    assert report.satisfied and report.aligned
    assert report.optimal_Z == pytest.approx(1.0)
    assert report.margin == pytest.approx(report.rhs - report.lhs)


def test_stability_check_is_symmetric_in_gravity_and_wall_data(grid, params):
    steep_wall = stability_check(grid, build_closure(grid, 'affine(1, 0, -3)', 0.5),
                                 potential_for(grid, 'linear_y(-1)'), params)
    steep_gravity = stability_check(grid, build_closure(grid, 'affine(1, 0, -1)', 0.5),
                                    potential_for(grid, 'linear_y(-3)'), params)
    assert steep_wall.lhs == pytest.approx(3.0)
    assert steep_gravity.lhs == pytest.approx(steep_wall.lhs)
    assert steep_gravity.rhs == pytest.approx(steep_wall.rhs)
    assert steep_gravity.satisfied == steep_wall.satisfied
    assert steep_gravity.quadratic_min == pytest.approx(steep_wall.quadratic_min)


def test_stability_check_fails_for_large_gravity(grid, params, aligned_closure):
    G = potential_for(grid, 'linear_y(-100)')
    report = stability_check(grid, aligned_closure, G, params)
    assert not report.satisfied
    assert report.margin < 0.0


def test_smallness_margin_decreases_with_gravity(grid, params, aligned_closure):
    eq = aligned_equilibrium(grid, aligned_closure)
    margins = [smallness_margin(eq, aligned_closure, potential_for(grid, f'linear_y({-s})'), params)
               for s in (1, 5, 25, 125)]
    assert all(b <= a for a, b in zip(margins, margins[1:]))
    assert margins[0] > 0.0


def test_certified_decay_rate():
    assert certified_decay_rate(0.5) == pytest.approx(1.0)
    assert certified_decay_rate(-1.0) == 0.0


def test_velocity_gradient_sup(grid):
    assert velocity_gradient_sup(VectorField.zeros(grid)) == 0.0
    assert velocity_gradient_sup(eigenmode_velocity(grid, 1.0)) > 0.0


def test_steady_solve_finds_aligned_rest_state(grid, params, aligned_closure):
    theta = ScalarField(grid, aligned_closure.thetaB.values.copy(), aligned_closure.trace)
    init = SimState(0.0, VectorField.zeros(grid), theta)
    steady = steady_solve(aligned_closure, params, init, 1e-8, 20.0)
    eq = aligned_equilibrium(grid, aligned_closure)
    assert steady.residual < 1e-8
    assert np.max(np.abs(steady.thetas.values - eq.thetas.values)) <= 1e-7


def test_steady_solve_reports_last_change(grid, params, cosine_closure):
    init = SimState(0.0, VectorField.zeros(grid), ScalarField.zeros(grid))
    with pytest.raises(SteadyStateError) as info:
        steady_solve(cosine_closure, params, init, 1e-12, 1.5)
    assert info.value.residual > 1e-12
    with pytest.raises(ValueError):
        steady_solve(cosine_closure, params, init, 0.0, 1.0)
