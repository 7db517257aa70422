import numpy as np
import pytest

from layeredpulse.exceptions import ConservationError
from layeredpulse.limit_sde import closed_form_moment
from layeredpulse.medium import HomogeneousMedium, ProfileMedium
from layeredpulse.modes import (
    Channel, backscatter_moment, cross_channel_covariance, default_step, mode_ensemble,
    propagate, transmission_ladder, transmission_moment, trend_violations,
)


def test_channel_admissible():
    ch = Channel.admissible(1.0, kappa_mag=5.0, eps=0.01)
    assert ch.lambda_eps == pytest.approx(np.sqrt(0.75))
    with pytest.raises(ValueError):
        Channel.admissible(1.0, kappa_mag=10.0, eps=0.01)
    with pytest.raises(ValueError):
        Channel.admissible(0.0)
    assert default_step([ch], 0.01) == pytest.approx(0.01 / 20)


def test_homogeneous_medium_is_transparent(half_params):
    ch = Channel.admissible(2.0, eps=0.01)
    traj = propagate(half_params, 0.01, [ch], 0.5, medium=HomogeneousMedium(2), n_record=6)
    np.testing.assert_array_equal(traj.alpha_eps, 1.0)
    np.testing.assert_array_equal(traj.beta_eps, 0.0)
    np.testing.assert_allclose(traj.tau_eps[0, 0], 2 * traj.z_samples)
    np.testing.assert_allclose(traj.z_samples, np.linspace(0, 0.5, 6))


def test_magnus_and_rk4_agree(half_params):
    channels = [Channel.admissible(1.0, eps=0.01), Channel.admissible(1.5, eps=0.01)]
    run = lambda method: propagate(
        half_params, 0.01, channels, 0.1, method=method, n_record=2, tol=1e-4,
        medium=ProfileMedium(1, lambda t: 0.1 * np.sin(0.3 * t)))
    magnus, rk4 = run('magnus'), run('rk4')
    assert magnus.max_defect < 1e-12
    np.testing.assert_allclose(magnus.alpha_eps, rk4.alpha_eps, atol=1e-3)
    np.testing.assert_allclose(magnus.beta_eps, rk4.beta_eps, atol=1e-3)


def test_random_propagation_conserves_flux(half_params):
    ch = Channel.admissible(1.0, eps=0.01)
    traj = propagate(half_params, 0.01, [ch], 0.2, seed=2, indices=range(3), n_modes=64,
                     n_record=5)
    assert traj.alpha_eps.shape == (3, 1, 5)
    assert traj.max_defect < 1e-10
    np.testing.assert_allclose(np.abs(traj.a_comp), np.abs(traj.alpha_eps))
    assert traj.phi_eps.shape == (3, 1, 5)
    alone = propagate(half_params, 0.01, [ch], 0.2, seed=2, indices=[1], n_modes=64,
                      n_record=5)
    np.testing.assert_array_equal(alone.alpha_eps[0], traj.alpha_eps[1])


def test_conservation_error_raised(half_params):
    ch = Channel.admissible(1.0, eps=0.01)
    with pytest.raises(ConservationError):
        propagate(half_params, 0.01, [ch], 0.2, method='rk4', dz=0.01, n_modes=64,
                  tol=1e-14, indices=range(4))


def test_propagate_arguments(half_params):
    ch = Channel.admissible(1.0, eps=0.01)
    with pytest.raises(ValueError):
        propagate(half_params, 0.0, [ch], 1.0)
    with pytest.raises(ValueError):
        propagate(half_params, 0.01, [ch], 0.0)
    with pytest.raises(ValueError):
        propagate(half_params, 0.01, [ch], 1.0, method='euler')
    oblique = Channel.admissible(1.0, kappa_mag=3.0, eps=0.01)
    with pytest.raises(ValueError):
        propagate(half_params, 0.02, [oblique], 1.0)


def test_ensemble_independent_of_batching(half_params):
    ch = Channel.admissible(1.0, eps=0.02)
    kwargs = dict(n_modes=64, master_seed=5)
    first = mode_ensemble(half_params, 0.02, [ch], 0.2, 7, batch_size=7, **kwargs)
    second = mode_ensemble(half_params, 0.02, [ch], 0.2, 7, batch_size=3, workers=2, **kwargs)
    np.testing.assert_array_equal(first.a_comp, second.a_comp)
    np.testing.assert_array_equal(first.b_comp, second.b_comp)
    assert np.all(np.abs(first.transmission) <= 1 + 1e-12)
    assert first.backscatter.shape == (7, 1)


def test_cross_channel_covariance_shape(half_params):
    channels = [Channel.admissible(1.0, eps=0.02), Channel.admissible(1.5, eps=0.02)]
    est = cross_channel_covariance(half_params, 0.02, channels, 0.2, 6, n_modes=64)
    assert est.n == 6


@pytest.mark.slow
def test_transmission_matches_limit(half_params):
    eps = 5e-3
    ch = Channel.admissible(1.0, eps=eps)
    estimate = transmission_moment(half_params, eps, ch, 1.0, 400, workers=4)
    target = closed_form_moment(half_params, 1.0, 1.0)
    assert max(abs(z) for z in estimate.z_scores(target)) < 3


def test_compensation_removes_common_phase(half_params):
    channels = [Channel.admissible(1.0, eps=0.02), Channel.admissible(2.5, eps=0.02)]
    traj = propagate(half_params, 0.02, channels, 0.2, seed=4, indices=range(3), n_modes=64,
                     n_record=4)
    omega = np.array([1.0, 2.5])[None, :, None]
    lhs = traj.a_comp * np.conj(traj.b_comp) * np.exp(2j * omega * traj.phi_eps / traj.eps)
    np.testing.assert_allclose(lhs, traj.alpha_eps * np.conj(traj.beta_eps), atol=1e-12)
    assert np.any(np.abs(traj.phi_eps[..., -1]) > 0)


def test_backscatter_moment(half_params):
    ch = Channel.admissible(1.0, eps=0.02)
    flat = backscatter_moment(half_params, 0.02, ch, 0.2, 5, batch_size=5,
                              medium=HomogeneousMedium(5))
    assert flat.mean == 0
    random = backscatter_moment(half_params, 0.02, ch, 0.2, 40, master_seed=3, n_modes=64)
    assert random.n == 40
    assert random.stderr > 0
    assert max(abs(z) for z in random.z_scores(0.0)) < 4


def test_cross_channel_covariance_values(half_params):
    ch = Channel.admissible(1.0, eps=0.02)
    kwargs = dict(n_modes=64, master_seed=8)
    same = cross_channel_covariance(half_params, 0.02, [ch, ch], 0.2, 20, **kwargs)
    ens = mode_ensemble(half_params, 0.02, [ch], 0.2, 20, **kwargs)
    x = ens.transmission[:, 0]
    # 1/conj(a) times 1/a is |1/a|^2, so the same-channel covariance is a variance
    assert same.mean.real == pytest.approx(np.mean(np.abs(x - x.mean()) ** 2))
    assert same.mean.real > 0
    assert abs(same.mean.imag) < 1e-12


def test_trend_violations():
    assert trend_violations([0.3, 0.2, 0.1], [0.01, 0.01, 0.01]) == 0
    # Growth hidden in the noise
    assert trend_violations([0.10, 0.12], [0.01, 0.01]) == 0
    assert trend_violations([0.10, 0.20, 0.05], [0.01, 0.01, 0.01]) == 1
    with pytest.raises(ValueError):
        trend_violations([0.1, 0.2], [0.01])


def test_transmission_ladder_order(half_params):
    table = transmission_ladder(half_params, [0.04, 0.08], 1.0, 0.1, 4, n_modes=32)
    assert list(table['eps']) == [0.08, 0.04]
    assert list(table.columns) == ['eps', 'mean_re', 'mean_im', 'error', 'stderr', 'z_score']
    target = closed_form_moment(half_params, 1.0, 0.1)
    np.testing.assert_allclose(table['error'], np.abs(table['mean_re'] + 1j * table['mean_im'] - target))


@pytest.mark.slow
def test_transmission_error_decreases_with_eps(half_params):
    table = transmission_ladder(half_params, [2e-2, 1e-2, 5e-3], 1.0, 1.0, 400, workers=4)
    assert trend_violations(table['error'], table['stderr'], z=3.0) == 0
    assert table['z_score'].iloc[-1] < 3
