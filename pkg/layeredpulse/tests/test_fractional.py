import numpy as np
import pytest

from layeredpulse.exceptions import NumericalWarning
from layeredpulse.fractional import (
    SampledSignal, apply_limit_operator, apply_memory_operator,
    causal_convolution_weights, causal_convolve, derivative, fourier_transform,
    hilbert_transform, kk_pair_residual, kk_residual, limit_constant,
    limit_symbol, lorentzian_pair, memory_symbol, weyl_derivative,
)


@pytest.fixture
def gaussian():
    return SampledSignal.from_function(lambda s: np.exp(-s ** 2), np.linspace(-10, 10, 2001))


def test_signal_validation():
    s = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        SampledSignal(s[:5], s[:5])
    with pytest.raises(ValueError):
        SampledSignal(s, s[:-1])
    with pytest.raises(ValueError):
        SampledSignal(s ** 2, s)
    with pytest.raises(ValueError):
        SampledSignal(s[::-1], s)
    sig = SampledSignal(s, 2 * s)
    assert sig.ds == pytest.approx(0.1)
    frame = sig.to_frame(output=sig.replace(s))
    assert list(frame.columns) == ['s', 'input', 'output']


@pytest.mark.parametrize('order, exact, atol', [
    (1, np.cos, 1e-8),
    (2, lambda s: -np.sin(s), 1e-8),
    (3, lambda s: -np.cos(s), 1e-6),
])
def test_derivative_interior(order, exact, atol):
    s = np.linspace(0, 2 * np.pi, 401)
    out = derivative(np.sin(s), s[1] - s[0], order)
    np.testing.assert_allclose(out[3:-3], exact(s)[3:-3], atol=atol)


def test_derivative_edges_first_order():
    s = np.linspace(0, 2 * np.pi, 401)
    out = derivative(np.sin(s), s[1] - s[0], 1)
    np.testing.assert_allclose(out[[0, 1, 2, -3, -2, -1]], np.cos(s[[0, 1, 2, -3, -2, -1]]),
                               atol=1e-3)


def test_derivative_integer_input():
    out = derivative(np.arange(10), 1.0, 1)
    assert out.dtype == float
    np.testing.assert_allclose(out, 1.0)
    np.testing.assert_array_equal(derivative(np.arange(4.0), 1.0, 0), np.arange(4.0))


def test_causal_convolution():
    np.testing.assert_allclose(causal_convolve([1.0, 0.5], [1.0, 2.0, 3.0]), [1.0, 2.5, 4.0])
    c = causal_convolution_weights([1.0, 1.0], [0.5, 0.5], 1.0)
    np.testing.assert_allclose(c, [0.5, 1.0])


@pytest.mark.parametrize('gamma_frac, j', [(0.5, 0), (0.3, 1), (0.75, 2)])
def test_weyl_derivative_of_exponential(gamma_frac, j):
    f = SampledSignal.from_function(np.exp, np.linspace(-40, 2, 4201))
    out = weyl_derivative(f, gamma_frac, j=j)
    # Higher-order stencils fall back to one-sided differences at the right end
    keep = (f.s_grid >= -5) & (f.s_grid <= 1.9)
    np.testing.assert_allclose(out.values[keep], f.values[keep], rtol=1e-3)


def test_weyl_derivative_arguments():
    f = SampledSignal.from_function(np.exp, np.linspace(0, 1, 101))
    with pytest.raises(ValueError):
        weyl_derivative(f, 1.0)
    with pytest.raises(ValueError):
        weyl_derivative(f, 0.5, j=-1)
    with pytest.warns(NumericalWarning):
        weyl_derivative(f, 0.5)


@pytest.mark.parametrize('fixture', ['half_params', 'short_params'])
def test_limit_operator_symbol(fixture, request, gaussian):
    params = request.getfixturevalue(fixture)
    out = apply_limit_operator(gaussian, params)
    omega = np.array([0.5, 1.0, 2.0])
    expected = limit_symbol(params, omega) * np.sqrt(np.pi) * np.exp(-omega ** 2 / 4)
    np.testing.assert_allclose(fourier_transform(out, omega), expected,
                               rtol=1e-2, atol=1e-2 * np.max(np.abs(expected)))


def test_memory_operator_symbol(half_params, gaussian):
    out = apply_memory_operator(gaussian, half_params)
    omega = np.array([0.5, 1.0, 2.0])
    expected = memory_symbol(half_params, omega) * np.sqrt(np.pi) * np.exp(-omega ** 2 / 4)
    np.testing.assert_allclose(fourier_transform(out, omega), expected,
                               rtol=1e-2, atol=1e-2 * np.max(np.abs(expected)))


def test_memory_operator_approaches_limit(half_params, gaussian):
    limit = apply_limit_operator(gaussian, half_params).values
    errors = [
        np.linalg.norm(apply_memory_operator(gaussian, half_params, l0=l0).values - limit)
        / np.linalg.norm(limit)
        for l0 in [1e-1, 1e-2, 1e-3]
    ]
    assert errors[2] < errors[0]
    assert errors[2] < 0.1


def test_memory_symbol_limit(half_params):
    omega = np.array([0.5, 1.0, 4.0])
    np.testing.assert_allclose(memory_symbol(half_params, omega, l0=1e-3),
                               limit_symbol(half_params, omega), rtol=0.03)


def test_limit_constant(half_params, critical_params):
    assert limit_constant(half_params) == pytest.approx(np.pi / (2 * np.sqrt(2)))
    assert limit_constant(critical_params) == pytest.approx(0.5)


def test_hilbert_of_lorentzian():
    omega = np.linspace(0, 256, 16385)
    even, odd = lorentzian_pair(omega)
    result = kk_pair_residual(omega, even, odd, (0.25, 8.0))
    assert max(result.residuals) < 1e-3
    assert set(result.table['relation']) == {'cos', 'sin'}
    with pytest.raises(ValueError):
        hilbert_transform(np.ones(4), 1.0)


def test_kk_residual(half_params):
    result = kk_residual(half_params)
    assert max(result.residuals) < 0.05
    with pytest.raises(ValueError):
        kk_residual(half_params, omega_band=(1.0, 300.0))
