import numpy as np
import pytest

from habitat_waves.grid import (Field, Grid, upwind_derivative, upwind_derivative_periodic,
                                upwind_matrix)
from habitat_waves.growth import GrowthModel
from habitat_waves.kernels import gaussian


def test_grid_spacing_and_refinement():
    g = Grid(10.0, 101)
    assert g.dx == pytest.approx(0.2)
    assert g.x[0] == -10 and g.x[-1] == 10
    assert g.refined().n == 201 and g.refined().dx == pytest.approx(0.1)


def test_problems_and_widening():
    k = gaussian(1.0)
    assert Grid(60, 2048).problems(GrowthModel(L=10), k) == []
    assert Grid(60, 101).problems(None, k)
    wide = Grid.for_instance(GrowthModel(L=55), k)
    assert wide.problems(GrowthModel(L=55), k) == []
    assert wide.dx == pytest.approx(Grid().dx, rel=1e-3)


def test_upwind_exact_on_quadratics_interior():
    g = Grid(5.0, 101)
    x = g.x
    d = upwind_derivative(x ** 2 + 3 * x, g.dx)
    assert np.allclose(d[:-2], 2 * x[:-2] + 3, atol=1e-10)


def test_upwind_matrix_matches_function():
    rng = np.random.default_rng(1)
    v = rng.random(50)
    assert np.allclose(upwind_matrix(50, 0.1) @ v, upwind_derivative(v, 0.1))
    assert np.allclose(upwind_matrix(50, 0.1, periodic=True) @ v, upwind_derivative_periodic(v, 0.1))
    # constants have zero periodic derivative
    assert np.allclose(upwind_derivative_periodic(np.ones(50), 0.1), 0)


def test_field_validation():
    g = Grid(1.0, 11)
    with pytest.raises(ValueError):
        Field(g, np.ones(10))
    with pytest.raises(ValueError):
        Field(g, np.full(11, np.nan))
    with pytest.raises(ValueError):
        Field(g, np.ones(11), frame="rotating")
    f = Field.from_function(g, np.cos)
    assert f.sup() == 1.0 and f.with_values(np.zeros(11), time=2).time == 2
