import numpy as np
import pytest

from core_types import (EdgeTraces, GridError, Params, ParamsError, ScalarField, SpecError, VectorField,
                        alpha_from_gamma, build_grid, gradient_sup_norm, make_potential, parse_field_spec)


def test_build_grid_spacing():
    grid = build_grid(8, 16, 1.0, 2.0)
    assert grid.hx == pytest.approx(0.125)
    assert grid.hy == pytest.approx(0.125)
    assert grid.shape == (8, 16)
    assert grid.area == pytest.approx(2.0)


@pytest.mark.parametrize('nx, ny, lx, ly', [(3, 8, 1.0, 1.0), (8, 8, 0.0, 1.0), (8, 8, 1.0, -1.0)])
def test_build_grid_rejects_bad_dimensions(nx, ny, lx, ly):
    with pytest.raises(GridError):
        build_grid(nx, ny, lx, ly)


def test_grid_is_hashable_and_comparable():
    assert build_grid(8, 8, 1.0, 1.0) == build_grid(8, 8, 1.0, 1.0)
    assert len({build_grid(8, 8, 1.0, 1.0), build_grid(8, 8, 1.0, 1.0)}) == 1


@pytest.mark.parametrize('gamma, alpha', [(5.0 / 3.0, 2.0 / 3.0), (1.4, 0.4)])
def test_alpha_from_gamma(gamma, alpha):
    assert alpha_from_gamma(gamma) == pytest.approx(alpha)


def test_alpha_from_gamma_outside_range():
    with pytest.raises(ParamsError) as info:
        alpha_from_gamma(2.5)
    assert info.value.field == 'gamma'


def test_params_derive_alpha_from_gamma():
    params = Params(mu=1.0, kappa=1.0, gamma=1.5)
    assert params.alpha == pytest.approx(0.5)
    assert params.with_changes(gamma=1.25).alpha == pytest.approx(0.25)
    assert params.with_changes(alpha=0.9).alpha == pytest.approx(0.9)


@pytest.mark.parametrize('changes, name', [
    ({'alpha': 0.0}, 'alpha'),
    ({'alpha': 1.0}, 'alpha'),
    ({'mu': 0.0}, 'mu'),
    ({'kappa': -1.0}, 'kappa'),
    ({'dt_cfl': 1.5}, 'dt_cfl'),
    ({'bc_coupling': 'explicit'}, 'bc_coupling'),
    ({'advection': 'central'}, 'advection'),
])
def test_params_validation_names_field(changes, name):
    base = {'mu': 1.0, 'kappa': 1.0, 'alpha': 0.5}
    base.update(changes)
    with pytest.raises(ParamsError) as info:
        Params(**base)
    assert info.value.field == name


def test_params_inconsistent_alpha_and_gamma():
    with pytest.raises(ParamsError):
        Params(mu=1.0, kappa=1.0, alpha=0.3, gamma=1.5)


def test_vector_field_walls_are_zeroed(grid):
    u = VectorField(grid, np.ones((grid.nx + 1, grid.ny)), np.ones((grid.nx, grid.ny + 1)))
    assert np.all(u.ux[0, :] == 0.0) and np.all(u.ux[-1, :] == 0.0)
    assert np.all(u.uy[:, 0] == 0.0) and np.all(u.uy[:, -1] == 0.0)
    assert np.all(u.ux[1:-1, :] == 1.0)


def test_field_shape_mismatch(grid):
    with pytest.raises(GridError):
        ScalarField(grid, np.zeros((grid.nx, grid.ny + 1)))
    with pytest.raises(GridError):
        VectorField(grid, np.zeros(grid.shape), np.zeros(grid.shape))


def test_parse_field_spec():
    spec = parse_field_spec('affine(1, 0, -1)')
    assert spec.name == 'affine'
    assert spec.number(2) == -1.0
    assert spec.number(5, 3.0) == 3.0
    assert parse_field_spec('zero').args == ()
    with pytest.raises(SpecError):
        parse_field_spec('1abc(')
    with pytest.raises(SpecError):
        spec.number(7)


def test_potential_is_zero_mean_with_unit_gradient(grid):
    G = make_potential(grid, 'linear_y(-1)')
    assert G.mean() == pytest.approx(0.0, abs=1e-14)
    assert gradient_sup_norm(G) == pytest.approx(1.0)
    with pytest.raises(SpecError):
        make_potential(grid, 'spherical(1)')


def test_edge_traces_shift_and_extremes(grid):
    trace = EdgeTraces.from_function(grid, lambda x, y: x + 0.0 * y)
    assert trace.max() == pytest.approx(1.0)
    assert trace.min() == pytest.approx(0.0)
    assert trace.shifted(2.0).min() == pytest.approx(2.0)
    assert trace.max_deviation(trace.shifted(0.5)) == pytest.approx(0.5)
