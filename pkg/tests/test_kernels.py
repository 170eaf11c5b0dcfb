import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from habitat_waves.kernels import (ConvolutionOperator, bump, convolve, from_config, gaussian,
                                   kernel_eval, moment_generating, moment_generating_derivative)

kernels = st.one_of(st.floats(0.3, 3.0).map(gaussian), st.floats(0.3, 3.0).map(bump))


def test_gaussian_density_at_zero():
    assert kernel_eval(gaussian(1.0), 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_bump_vanishes_at_support_edge():
    assert kernel_eval(bump(1.0), 1.0) == 0.0
    assert kernel_eval(bump(1.0), 1.5) == 0.0


@given(kernels, st.floats(-10, 10))
def test_kernel_even_and_nonnegative(k, z):
    assert kernel_eval(k, z) == kernel_eval(k, -z)
    assert kernel_eval(k, z) >= 0


@pytest.mark.parametrize("k", [gaussian(1.0), gaussian(0.5), bump(1.0), bump(2.5)])
def test_kernel_integrates_to_one(k):
    total, _ = integrate.quad(lambda z: kernel_eval(k, z), -k.support_radius, k.support_radius,
                              points=[0.0], epsabs=1e-13, epsrel=1e-13, limit=200)
    assert abs(total - 1) < 1e-10
    assert kernel_eval(k, 0.0) > 0


@pytest.mark.parametrize("k", [gaussian(1.0), gaussian(2.0), bump(1.0)])
def test_tail_certificate(k):
    z = np.linspace(k.tail_M + 1e-9, k.support_radius + 5, 400)
    assert np.all(kernel_eval(k, z) < np.exp(-k.tail_mu * z))


def test_mgf_gaussian_closed_form_matches_quadrature():
    k = gaussian(1.0)
    assert moment_generating(k, 0.0) == 1.0
    assert moment_generating(k, 1.0) == pytest.approx(math.exp(0.5), rel=1e-14)
    # quadrature oracle on the exact density
    oracle, _ = integrate.quad(lambda z: math.exp(1.3 * z - z * z / 2) / math.sqrt(2 * math.pi),
                               -np.inf, np.inf, epsrel=1e-13)
    assert moment_generating(k, 1.3) == pytest.approx(oracle, rel=1e-11)


def test_mgf_bump_matches_quadrature():
    k = bump(1.5)
    oracle, _ = integrate.quad(lambda z: math.exp(0.8 * z) * math.cos(math.pi * z / 3) ** 2 / 1.5,
                               -1.5, 1.5, epsrel=1e-13)
    assert moment_generating(k, 0.8) == pytest.approx(oracle, rel=1e-10)


@given(kernels, st.floats(0, 8))
def test_mgf_even_and_at_least_one(k, mu):
    m = moment_generating(k, mu)
    assert m == pytest.approx(moment_generating(k, -mu), rel=1e-12)
    assert m >= 1 - 1e-12


def test_mgf_derivative_matches_difference():
    k = gaussian(1.0)
    h = 1e-5
    fd = (moment_generating(k, 0.7 + h) - moment_generating(k, 0.7 - h)) / (2 * h)
    assert moment_generating_derivative(k, 0.7) == pytest.approx(fd, rel=1e-8)


def test_mgf_overflow_guard():
    with pytest.raises((OverflowError, ValueError, ArithmeticError)):
        moment_generating(gaussian(1.0), 60.0)


def test_from_config_round_trip():
    for k in (gaussian(0.7), bump(2.0)):
        assert from_config(k.to_config()) == k
    with pytest.raises(ValueError):
        from_config({"type": "laplace"})


@pytest.fixture(scope="module")
def op():
    return ConvolutionOperator.build(gaussian(1.0), 0.05, 801)


def test_weights_symmetric_and_normalized(op):
    w = op.weights
    assert np.array_equal(w, w[::-1])
    assert abs(w.sum() - 1) < 1e-14
    assert op.row_sums().max() <= 1 + 1e-12


def test_constant_reproduced_in_interior(op):
    out = op.apply(np.ones(op.n_points))
    m = op.half_width
    assert np.max(np.abs(out[m:-m] - 1)) < 1e-10


def test_zero_maps_to_zero(op):
    assert np.all(op.apply(np.zeros(op.n_points)) == 0)


def test_delta_gives_kernel_samples(op):
    n, m = op.n_points, op.half_width
    delta = np.zeros(n)
    delta[n // 2] = 1 / op.dx
    out = op.apply(delta) * op.dx
    assert np.allclose(out[n // 2 - m:n // 2 + m + 1], op.weights, atol=1e-15)
    # direct summation oracle on the raw kernel samples
    z = (np.arange(n) - n // 2) * op.dx
    raw = kernel_eval(op.kernel, z) * op.dx
    assert np.max(np.abs(out - raw / raw.sum())) < 1e-12


@given(st.integers(0, 2 ** 31))
def test_fft_matches_dense(seed):
    rng = np.random.default_rng(seed)
    op = ConvolutionOperator.build(gaussian(1.0), 0.1, 157)
    v = rng.random((2, 157))
    assert np.allclose(op.apply(v), op.apply(v, method="dense"), atol=1e-13)
    assert np.allclose(op.apply(v[0]), op.dense_matrix() @ v[0], atol=1e-13)
    assert np.allclose(op.apply(v[0]), op.sparse_matrix() @ v[0], atol=1e-13)


def test_periodic_apply_matches_circulant():
    op = ConvolutionOperator.build(gaussian(1.0), 0.1, 300)
    v = np.random.default_rng(0).random(300)
    assert np.allclose(op.apply_periodic(v), op.sparse_matrix(periodic=True) @ v, atol=1e-13)
    assert np.allclose(op.apply_periodic(np.ones(300)), 1.0, atol=1e-14)


def test_size_mismatch_rejected(op):
    with pytest.raises(ValueError):
        op.apply(np.ones(op.n_points + 1))
    with pytest.raises(ValueError):
        ConvolutionOperator.build(gaussian(1.0), 0.1, 20).apply_periodic(np.ones(20))


def test_convolve_returns_field(small_grid, small_op):
    from habitat_waves.grid import Field
    f = Field.constant(small_grid, 2.0)
    out = convolve(small_op, f)
    assert isinstance(out, Field) and out.values[300] == pytest.approx(2.0, abs=1e-12)
