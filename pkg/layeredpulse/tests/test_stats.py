import numpy as np
import pytest

from layeredpulse.correlation import delay_constant
from layeredpulse.medium import spawn_stream
from layeredpulse.stats import (
    aggregated_variance_hurst, delay_limit, dfa_hurst, expected_variance_slope,
    fractional_gaussian_noise, hurst_estimate, hurst_from_paths,
    integrated_medium_paths, scaling_study, travel_time_ensemble,
    travel_time_variance, travel_time_variance_constant,
)


def _fbm_paths(hurst, n_paths=200, n=1024, seed=0):
    rng = spawn_stream(seed, 0)
    noise = np.stack([fractional_gaussian_noise(n, hurst, rng) for _ in range(n_paths)])
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(noise, axis=1)], axis=1)


def test_homogeneous_medium_has_no_delay(half_params):
    sample = travel_time_ensemble(half_params, 1e-2, 1.0, 4, homogeneous=True)
    np.testing.assert_array_equal(sample.t0, 1.0)
    np.testing.assert_allclose(sample.delay, 0.0, atol=1e-12)
    assert sample.n == 4


def test_delay_positive_pathwise(half_params):
    sample = travel_time_ensemble(half_params, 1e-2, 0.1, 5, n_modes=64)
    assert np.all(sample.delay > 0)
    assert list(sample.to_frame().columns) == ['eps', 't0', 't_char', 'delay']


def test_ensemble_independent_of_batching(half_params):
    kwargs = dict(n_modes=64, master_seed=3)
    first = travel_time_ensemble(half_params, 2e-2, 0.2, 6, batch_size=6, **kwargs)
    second = travel_time_ensemble(half_params, 2e-2, 0.2, 6, batch_size=4, workers=2, **kwargs)
    np.testing.assert_array_equal(first.t0, second.t0)
    np.testing.assert_array_equal(first.t_char, second.t_char)


def test_recorded_paths(half_params):
    sample = travel_time_ensemble(half_params, 2e-2, 0.2, 3, n_modes=64, n_record=5)
    np.testing.assert_allclose(sample.z, np.linspace(0, 0.2, 5))
    assert sample.paths.shape == (3, 5)
    np.testing.assert_array_equal(sample.paths[:, 0], 0.0)
    np.testing.assert_allclose(0.2 + sample.paths[:, -1] / 2, sample.t0)


def test_ensemble_arguments(half_params):
    with pytest.raises(ValueError):
        travel_time_ensemble(half_params, 1e-2, 1.0, 1)
    with pytest.raises(ValueError):
        travel_time_ensemble(half_params, 0.0, 1.0, 4)


@pytest.mark.parametrize('fixture', ['half_params', 'short_params'])
def test_variance_prediction_reaches_limit(fixture, request):
    params = request.getfixturevalue(fixture)
    eps = 1e-8
    scale = eps ** (1 + params.gamma) if params.gamma < 1 else eps ** 2
    ratio = travel_time_variance(params, eps, 1.0) / scale
    assert ratio == pytest.approx(travel_time_variance_constant(params, 1.0), rel=1e-2)


def test_variance_constant_values(half_params, critical_params):
    assert travel_time_variance_constant(half_params, 1.0) == pytest.approx(
        2 * np.sqrt(np.pi) / 1.5)
    assert travel_time_variance_constant(critical_params, 2.0) > 0
    assert expected_variance_slope(0.5) == 1.5
    assert expected_variance_slope(1.5) == 2.0


def test_rank_one_lowers_variance(half_params):
    linear = travel_time_variance(half_params, 5e-3, 1.0)
    bounded = travel_time_variance(half_params, 5e-3, 1.0, rank_one=True)
    assert bounded < linear
    assert bounded > 0.7 * linear


@pytest.mark.parametrize('hurst', [0.5, 0.75, 0.3])
def test_aggregated_variance_calibration(hurst):
    paths = _fbm_paths(hurst)
    assert aggregated_variance_hurst(paths) == pytest.approx(hurst, abs=0.05)


def test_brownian_paths():
    rng = spawn_stream(1, 0)
    paths = np.cumsum(rng.standard_normal((200, 1025)), axis=1)
    paths -= paths[:, :1]
    assert aggregated_variance_hurst(paths) == pytest.approx(0.5, abs=0.05)
    assert dfa_hurst(paths) == pytest.approx(0.5, abs=0.1)


def test_hurst_from_paths_interval():
    paths = _fbm_paths(0.75, seed=2)
    estimate, ci, h_dfa = hurst_from_paths(paths, n_boot=50)
    assert ci[0] < ci[1]
    assert ci[0] - 0.01 <= estimate <= ci[1] + 0.01
    assert h_dfa == pytest.approx(0.75, abs=0.1)
    again = hurst_from_paths(paths, n_boot=50)
    assert again[1] == ci


def test_hurst_arguments():
    rng = spawn_stream(0, 0)
    with pytest.raises(ValueError):
        fractional_gaussian_noise(16, 1.0, rng)
    with pytest.raises(ValueError):
        aggregated_variance_hurst(np.zeros((2, 9)))
    noise = fractional_gaussian_noise(4096, 0.75, rng)
    assert np.var(noise) == pytest.approx(1.0, rel=0.3)


def test_integrated_paths_variance(half_params):
    eps = 1e-3
    z, paths = integrated_medium_paths(half_params, eps, 1.0, 400, n_record=65, n_modes=128)
    assert paths.shape == (400, 65)
    assert z[-1] == 1.0
    np.testing.assert_array_equal(paths[:, 0], 0.0)
    predicted = travel_time_variance(half_params, eps, 1.0)
    assert np.var(paths[:, -1]) == pytest.approx(predicted, rel=0.3)


def test_hurst_estimate_uses_travel_paths(half_params):
    kwargs = dict(n_modes=32, master_seed=5)
    estimate = hurst_estimate(half_params, 0.05, 1.0, 6, n_record=65, n_boot=5,
                              linear_eps=1e-3, **kwargs)
    sample = travel_time_ensemble(half_params, 0.05, 1.0, 6, n_record=65, **kwargs)
    assert estimate.hurst == pytest.approx(aggregated_variance_hurst(sample.paths))
    _, linear = integrated_medium_paths(half_params, 1e-3, 1.0, 6, 5, n_record=65, n_modes=32)
    assert estimate.hurst_linear == pytest.approx(aggregated_variance_hurst(linear))
    assert estimate.to_dict()['H_linear'] == estimate.hurst_linear
    assert estimate.expected == 0.75


def test_scaling_study_needs_ladder(half_params):
    with pytest.raises(ValueError):
        scaling_study(half_params, 1.0, [1e-2, 5e-3], 10)


def test_scaling_study_divides_out_nonlinearity(half_params):
    study = scaling_study(half_params, 0.05, [4e-2, 2e-2, 1e-2], 3, n_modes=32)
    assert list(study.table.columns) == [
        'eps', 'var', 'var_theory', 'rank_one', 'var_linear', 'ratio', 'ratio_limit',
        'sd_scaled', 'delay_mean']
    assert study.table['rank_one'].is_monotonic_decreasing
    assert (study.table['rank_one'] < 1).all()
    assert study.slope > study.slope_raw


@pytest.mark.slow
def test_variance_scaling_long_range(half_params):
    study = scaling_study(half_params, 1.0, [2e-2, 1e-2, 5e-3], 400, workers=4)
    assert study.expected_slope == 1.5
    assert abs(study.slope - 1.5) < 0.2
    assert study.slope_raw < study.slope
    np.testing.assert_allclose(study.table['var'], study.table['var_theory'], rtol=0.3)


@pytest.mark.slow
def test_variance_scaling_short_range(short_params):
    study = scaling_study(short_params, 1.0, [2e-2, 1e-2, 5e-3], 400, workers=4)
    assert study.expected_slope == 2.0
    assert abs(study.slope - 2.0) < 0.2
    np.testing.assert_allclose(study.table['var'], study.table['var_theory'], rtol=0.3)


@pytest.mark.slow
def test_hurst_long_range(half_params):
    estimate = hurst_estimate(half_params, 1e-3, 1.0, 200, linear_eps=1e-5, workers=4)
    assert estimate.expected == 0.75
    assert estimate.hurst == pytest.approx(0.75, abs=0.05)
    assert estimate.hurst_linear == pytest.approx(0.75, abs=0.05)


@pytest.mark.slow
def test_hurst_short_range(short_params):
    # Blocks of at least 32 records stay beyond the correlation time
    estimate = hurst_estimate(short_params, 1e-3, 1.0, 200, linear_eps=1e-5, workers=4,
                              min_block=32)
    assert estimate.expected == 0.5
    assert estimate.hurst == pytest.approx(0.5, abs=0.05)
    assert estimate.hurst_linear == pytest.approx(0.5, abs=0.05)


@pytest.mark.slow
def test_delay_limit(front_params):
    table = delay_limit(front_params, [1e-3], 5.0, 20, workers=4)
    theory = delay_constant(front_params, 5.0)
    assert table['delay_theory'][0] == pytest.approx(7.9057, abs=1e-4)
    assert table['delay_mean'][0] == pytest.approx(theory, rel=0.05)
    assert table['positive_rate'][0] == 1.0
