import numpy as np
import pytest

from plaplab.errors import ConfigurationError
from plaplab.geometry import DomainSpec, WeightSpec, make_grid, weight_tables


def test_interval_five_nodes():
    g = make_grid(DomainSpec.interval(0, 1, 5), min_resolution=3)
    np.testing.assert_allclose(g.coords[0], [0, 0.25, 0.5, 0.75, 1])
    assert np.flatnonzero(g.interior).tolist() == [1, 2, 3]
    assert g.normals[0, 0] == -1 and g.normals[-1, 0] == 1
    assert not g.normals[1:-1].any()


def test_rectangle_counts():
    g = make_grid(DomainSpec.rectangle(0, 1, 0, 1, 5), min_resolution=3)
    assert g.size == 25
    assert g.n_interior == 9
    assert g.boundary.sum() == 16
    assert g.corner.sum() == 4
    assert not (g.interior & g.boundary).any()
    assert (g.interior | g.boundary).all()


def test_rectangle_normals_are_unit_axis_vectors():
    g = make_grid(DomainSpec.rectangle(0, 2, -1, 1, 9))
    face = g.boundary & ~g.corner
    n = g.normals[face]
    np.testing.assert_array_equal(np.sum(np.abs(n), axis=-1), 1.0)
    assert not g.normals[g.corner].any()
    assert g.normals[0, 4].tolist() == [-1, 0]
    assert g.normals[4, -1].tolist() == [0, 1]


@pytest.mark.parametrize("n", [3, 7])
def test_below_minimum_resolution(n):
    with pytest.raises(ConfigurationError):
        make_grid(DomainSpec.interval(0, 1, n))


@pytest.mark.parametrize("bounds", [(1, 0), (0, 0), (0, np.inf)])
def test_invalid_bounds(bounds):
    with pytest.raises(ConfigurationError):
        DomainSpec.interval(*bounds, 9)


def test_spacing_and_node_count():
    spec = DomainSpec.rectangle(0, 2, 0, 1, (17, 9))
    g = make_grid(spec)
    assert g.size == 17 * 9
    assert g.spacing == (0.125, 0.125)


@pytest.mark.parametrize("spec", [DomainSpec.interval(0, 3, 33),
                                  DomainSpec.rectangle(0, 2, -1, 0.5, (17, 12))])
def test_quadrature_of_constants(spec):
    w = weight_tables(WeightSpec.zero(), make_grid(spec))
    assert abs(w.measure_weights.sum() - spec.volume) < 1e-12


def test_zero_weight():
    w = weight_tables(WeightSpec.zero(), make_grid(DomainSpec.interval(0, 1, 9)))
    assert not w.f.any() and not w.grad_f.any() and not w.hess_f.any()
    np.testing.assert_array_equal(w.measure_weights, w.grid.quad_weights)


def test_quadratic_weight_values():
    w = weight_tables(WeightSpec.quadratic(1.0, 0.0), make_grid(DomainSpec.interval(0, 1, 9)))
    mid = 4
    assert w.f[mid] == 0.25
    assert w.grad_f[mid, 0] == 1.0
    assert np.all(w.hess_f == 2.0)


def test_quadratic_hessian_exact_in_2d():
    w = weight_tables(WeightSpec.quadratic(0.7, [0.2, 0.3]), make_grid(DomainSpec.rectangle(0, 1, 0, 1, 9)))
    np.testing.assert_array_equal(w.hess_f, np.broadcast_to(1.4 * np.eye(2), w.hess_f.shape))


def test_linear_weight_has_zero_hessian():
    w = weight_tables(WeightSpec.linear(2.0), make_grid(DomainSpec.interval(0, 1, 9)))
    assert not w.hess_f.any()
    assert np.all(w.grad_f == 2.0)


def test_measure_weights_positive():
    w = weight_tables(WeightSpec.quadratic(-3.0, 0.5), make_grid(DomainSpec.interval(0, 1, 9)))
    assert np.all(w.measure_weights > 0)


def test_tabulated_weight_missing_nodes():
    g = make_grid(DomainSpec.interval(0, 1, 9))
    with pytest.raises(ConfigurationError):
        weight_tables(WeightSpec.tabulated(np.zeros(8)), g)


def test_tabulated_weight_uses_difference_stencils():
    g = make_grid(DomainSpec.interval(0, 1, 17))
    x = g.coords[0]
    w = weight_tables(WeightSpec.tabulated(x**2), g)
    np.testing.assert_allclose(w.grad_f[:, 0], 2 * x, atol=1e-12)
    np.testing.assert_allclose(w.hess_f[..., 0, 0], 2.0, atol=1e-9)
    assert not WeightSpec.tabulated(x).smooth


def test_tables_are_read_only():
    w = weight_tables(WeightSpec.zero(), make_grid(DomainSpec.interval(0, 1, 9)))
    with pytest.raises(ValueError):
        w.f[0] = 1.0


def test_boundary_fraction_shrinks_under_refinement():
    fr = [make_grid(DomainSpec.rectangle(0, 1, 0, 1, n)).boundary.mean() for n in (9, 17, 33, 65)]
    assert all(b < a for a, b in zip(fr, fr[1:]))
    # boundary nodes ~ perimeter / h, all nodes ~ area / h^2
    assert fr[-1] * 64 == pytest.approx(4, rel=0.1)


def test_unknown_weight_form():
    with pytest.raises(ConfigurationError):
        WeightSpec("cubic", {})
    with pytest.raises(ConfigurationError):
        WeightSpec("linear", {})
