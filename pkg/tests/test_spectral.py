import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from habitat_waves.errors import NumericalError
from habitat_waves.grid import Grid
from habitat_waves.growth import GrowthModel
from habitat_waves.kernels import ConvolutionOperator, bump, gaussian, moment_generating
from habitat_waves.spectral import (_rk4_rate, characteristic_function, characteristic_roots,
                                    eigen_tail_check, principal_eigenvalue,
                                    principal_eigenvalue_growthrate, principal_eigenvalue_operator,
                                    spreading_speed)


def test_spreading_speed_gaussian_closed_form(kernel):
    c_star, mu_star = spreading_speed(kernel, 1.0)
    assert abs(c_star - math.exp(0.5)) < 1e-12 and abs(mu_star - 1) < 1e-10


def test_spreading_speed_bump_against_brute_force():
    k = bump(1.0)
    mus = np.linspace(0.05, 12, 200001)
    h = np.array([(moment_generating(k, m) - 1 + 1.0) / m for m in mus[::100]])
    c_star, mu_star = spreading_speed(k, 1.0)
    assert c_star <= h.min() + 1e-12
    assert c_star == pytest.approx(h.min(), rel=1e-4)


def test_spreading_speed_increases_with_r(kernel):
    assert 0 < spreading_speed(kernel, 0.5)[0] < spreading_speed(kernel, 1.0)[0]
    with pytest.raises(ValueError):
        spreading_speed(kernel, 0.0)


def test_roots_examples(kernel):
    r = characteristic_roots(0.0, 1.0, kernel, 0.0)
    assert abs(r.mu_plus - math.sqrt(2 * math.log(2))) < 1e-12
    assert abs(r.mu_minus + r.mu_plus) < 1e-10
    r = characteristic_roots(0.5, 1.0, kernel, 0.0)
    assert r.mu_plus < abs(r.mu_minus)
    with pytest.raises((ValueError, NumericalError)):
        characteristic_roots(0.0, 1.0, kernel, -1.0)


@given(st.floats(0, 3), st.floats(0.1, 3), st.floats(0.05, 3))
def test_roots_are_zeros_of_g(c, q, excess):
    k = gaussian(1.0)
    lam = -q + excess
    r = characteristic_roots(c, q, k, lam)
    assert r.mu_minus < 0 < r.mu_plus
    for mu in (r.mu_minus, r.mu_plus):
        assert abs(characteristic_function(c, q, k, lam, mu)) < 1e-10


@pytest.fixture(scope="module")
def tiny():
    grid = Grid(20.0, 401)
    return grid, ConvolutionOperator.build(gaussian(1.0), grid.dx, grid.n)


@pytest.mark.parametrize("c", [0.0, 0.7])
def test_operator_matches_dense_eigs(tiny, c):
    grid, op = tiny
    g = GrowthModel(L=3)
    inv = principal_eigenvalue_operator(c, g, grid, op)
    dense = principal_eigenvalue_operator(c, g, grid, op, method="dense")
    power = principal_eigenvalue_operator(c, g, grid, op, method="power")
    assert inv.lambda_cl == pytest.approx(dense.lambda_cl, abs=1e-9)
    assert inv.lambda_cl == pytest.approx(power.lambda_cl, abs=1e-7)
    assert inv.residual < 1e-6
    phi = inv.eigenfunction.values
    assert np.all(phi[1:-1] > 0)


def test_homogeneous_and_constant_decay(tiny):
    grid, op = tiny
    hom = GrowthModel(1.0, 1.0, 0.0, 1.0, transition="homogeneous")
    rep = principal_eigenvalue_operator(0.4, hom, grid, op)
    assert rep.lambda_cl == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(rep.eigenfunction.values, rep.eigenfunction.values[0])
    const = np.full(grid.n, -1.0)
    assert principal_eigenvalue_operator(0.4, const, grid, op).lambda_cl == pytest.approx(-1, abs=1e-10)
    assert principal_eigenvalue_growthrate(0.4, const, grid, op).value == pytest.approx(-1, abs=1e-6)
    assert principal_eigenvalue_growthrate(0.0, hom, grid, op).value == pytest.approx(1, abs=1e-6)


@given(st.floats(0, 2.0), st.floats(0, 8))
def test_lambda_bounds(c, L):
    grid = Grid(20.0, 401)
    op = ConvolutionOperator.build(gaussian(1.0), grid.dx, grid.n)
    lam = principal_eigenvalue_operator(c, GrowthModel(L=L), grid, op).lambda_cl
    assert -1.0 - 1e-6 <= lam < 1.0
    c_star, mu_star = spreading_speed(gaussian(1.0), 1.0)
    assert lam <= mu_star * (c_star - c) + 1e-9


def test_growth_rate_cross_check(tiny):
    grid, op = tiny
    rep = principal_eigenvalue(0.5, GrowthModel(L=3), grid, op, cross_check=True)
    assert rep.method == "Both" and rep.cross_method_gap < 1e-3


def test_rk4_rate_inverts_amplification():
    dt, lam = 0.05, -0.37
    z = lam * dt
    factor = 1 + z + z * z / 2 + z ** 3 / 6 + z ** 4 / 24
    assert _rk4_rate(math.log(factor) / dt, dt) == pytest.approx(lam, abs=1e-13)


def test_eigen_tail_check(default_config):
    from habitat_waves.analysis import _instance
    g, grid, op = _instance(default_config, 10.0)
    rep = principal_eigenvalue_operator(0.0, g, grid, op)
    roots = characteristic_roots(0.0, 1.0, op.kernel, rep.lambda_cl)
    chk = eigen_tail_check(rep, roots, g.outer_edge)
    assert chk.passed and not chk.skipped
    right, left = chk.slopes
    assert right == pytest.approx(-left, rel=0.05)
    assert right == pytest.approx(roots.mu_minus, rel=0.05)
    hom = principal_eigenvalue_operator(0.0, GrowthModel(transition="homogeneous"), grid, op)
    assert eigen_tail_check(hom, roots, 11.0).skipped


def test_no_patch_sits_at_far_field_rate(tiny):
    grid, op = tiny
    rep = principal_eigenvalue_operator(1.5, GrowthModel(L=0), grid, op)
    assert rep.lambda_cl == -1.0
    assert rep.diagnostics["truncated_lambda"] < -1.0
    assert principal_eigenvalue_growthrate(1.5, GrowthModel(L=0), grid, op).value == -1.0
