import numpy as np
import pytest
from scipy import integrate

from layeredpulse.correlation import scattering_coefficients
from layeredpulse.kernel import (
    Source, evolve_schrodinger, gaussian_source, homogeneous_front_on_axis,
    homogeneous_front_reference, kernel_time_profile, khat, khat_limit,
    pulse_front, pulse_table, scattering_exponent, spectral_centroid,
)


def test_khat_identity_and_decay(half_params):
    coeffs = scattering_coefficients(half_params, 1.0)
    assert khat(coeffs, half_params, 1.0, 0.0, 0.0) == 1.0
    near = abs(khat(coeffs, half_params, 1.0, 0.0, 1.0))
    far = abs(khat(coeffs, half_params, 1.0, 0.0, 2.0))
    assert near < 1.0
    assert far == pytest.approx(near ** 2)
    with pytest.raises(ValueError):
        khat(coeffs, half_params, 1.0, 0.0, -1.0)


def test_khat_transverse_phase(half_params):
    values = khat(0.0, half_params, 2.0, np.array([0.0, 0.5, 1.0]), 3.0)
    np.testing.assert_allclose(np.abs(values), 1.0)
    assert np.angle(values[1]) == pytest.approx(-0.75)


def test_khat_limit(half_params):
    value = complex(khat_limit(half_params, 1.0, 0.0, 1.0))
    assert value == pytest.approx(np.exp(-2 * np.pi * (1 + 1j) / 8))


def test_scattering_exponent_modes(half_params):
    omega = np.array([0.5, 1.0])
    np.testing.assert_array_equal(
        scattering_exponent(half_params, omega, 'homogeneous'), 0.0)
    finite = scattering_exponent(half_params, omega, 'finite_l0')
    assert np.all(finite.real > 0)
    with pytest.raises(ValueError):
        scattering_exponent(half_params, omega, 'random')


def test_source_bounds():
    with pytest.raises(ValueError):
        Source(omega_cut=2.0, omega_max=1.0)
    assert gaussian_source().upper_q(3.0) == 6.0
    assert Source(kappa_max=2.0).upper_q(-3.0) == 6.0


def test_closed_form_matches_reference():
    for s in [-1.0, 0.0, 1.5, 4.0]:
        assert homogeneous_front_on_axis(s, 5.0) == pytest.approx(
            homogeneous_front_reference(s, 0.0, 5.0), rel=1e-7, abs=1e-12)


def test_homogeneous_front(half_params):
    s = np.linspace(-3, 6, 37)
    front = pulse_front(gaussian_source(), half_params, 1.0, mode='homogeneous', s_grid=s)
    exact = homogeneous_front_on_axis(s, 1.0)
    assert front.values.shape == (1, 37)
    assert front.peak == pytest.approx(np.max(np.abs(exact)), rel=1e-4)
    np.testing.assert_allclose(front.at(0.0), exact, atol=1e-4 * np.max(np.abs(exact)))


def test_random_front_attenuated(front_params):
    s = np.linspace(-3, 6, 46)
    source = gaussian_source()
    flat = pulse_front(source, front_params, 5.0, mode='homogeneous', s_grid=s)
    random = pulse_front(source, front_params, 5.0, mode='finite_l0', s_grid=s)
    limit = pulse_front(source, front_params, 5.0, mode='limit', s_grid=s)
    assert random.peak < flat.peak
    assert limit.peak < flat.peak
    table = random.to_frame()
    assert list(table.columns) == ['s', 'y1', 'p']
    assert len(table) == 46
    table = pulse_table(flat, random, limit, {1 / 6: random})
    assert list(table.columns) == [
        's', 'y1', 'p_hom', 'p_medium', 'p_limit', 'p_medium_beta_0.166667']
    np.testing.assert_array_equal(table['p_limit'], limit.values.ravel())
    short = pulse_front(source, front_params, 5.0, mode='limit', s_grid=s[:10])
    with pytest.raises(ValueError):
        pulse_table(flat, random, short)


def test_two_sided_residue(half_params):
    s = np.linspace(-3, 6, 19)
    source = Source(n_omega=512)
    folded = pulse_front(source, half_params, 1.0, s_grid=s)
    both = pulse_front(source, half_params, 1.0, s_grid=s, two_sided=True)
    assert both.imag_residue < 1e-8
    np.testing.assert_allclose(both.values, folded.values, atol=1e-10 * folded.peak)


def test_stepped_evolution_matches_direct(half_params):
    s = np.linspace(-3, 6, 19)
    source = Source(n_omega=256)
    direct = pulse_front(source, half_params, 1.0, mode='limit', s_grid=s, y_grid=[0.0, 0.5])
    stepped = evolve_schrodinger(source, half_params, 1.0, 0.3, mode='limit', s_grid=s,
                                 y_grid=[0.0, 0.5])
    np.testing.assert_allclose(stepped.values, direct.values, atol=1e-10 * direct.peak)
    finite = evolve_schrodinger(source, half_params, 1.0, 0.45, s_grid=s)
    np.testing.assert_allclose(finite.values, pulse_front(source, half_params, 1.0, s_grid=s).values,
                               atol=1e-10 * direct.peak)
    with pytest.raises(ValueError):
        evolve_schrodinger(source, half_params, 1.0, 0.0)


def test_kernel_time_profile(half_params):
    s = np.linspace(-20, 200, 4401)
    k = kernel_time_profile(half_params, 1.0, s)
    assert integrate.trapezoid(k, s) == pytest.approx(1.0, abs=0.05)
    # Heavy tail on the delayed side
    assert k[np.searchsorted(s, 20.0)] > 10 * abs(k[0])
    with pytest.raises(ValueError):
        kernel_time_profile(half_params, 1.0, s, mode='homogeneous')


def test_spectral_centroid():
    centroid = spectral_centroid(gaussian_source())
    assert 0.05 < centroid < 8.0
