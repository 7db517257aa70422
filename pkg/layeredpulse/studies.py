# =============================================================================
# LOAD DEPENDENCIES
# =============================================================================

import logging
import numpy as np
import pandas as pd

from layeredpulse.correlation import (
    SpectralRule, autocorrelation, limit_coefficients, regime,
    scaled_coefficients, scattering_coefficients, tail_constants,
    time_domain_coefficients, travel_time_scale)
from layeredpulse.fractional import (
    SampledSignal, apply_limit_operator, apply_memory_operator,
    kk_pair_residual, kk_residual, lorentzian_pair, weyl_derivative)
from layeredpulse.kernel import (
    gaussian_source, homogeneous_front_on_axis, pulse_front, pulse_table,
    spectral_centroid)
from layeredpulse.limit_sde import (
    MomentEstimate, closed_form_moment, sde_moment, simulate_sde)
from layeredpulse.medium import (
    build_spectral_grid, grid_autocorrelation, realization_csv)
from layeredpulse.modes import (
    Channel, mode_ensemble, transmission_ladder, transmission_moment,
    trend_violations)
from layeredpulse.stats import (
    delay_limit, hurst_estimate, scaling_study, travel_time_variance,
    travel_time_variance_constant)
from layeredpulse.study import Artifact, Check, Study

logger = logging.getLogger(__name__)

STUDIES = {}


def register(name):
    def decorator(builder):
        STUDIES[name] = builder
        return builder
    return decorator


def build_study(name):
    """
    Build the named `Study`; each takes a single `config` input.
    """
    try:
        builder = STUDIES[name]
    except KeyError:
        raise ValueError(f"Unknown study {name!r}; options are {sorted(STUDIES)}.")
    return builder()


def _inputs(study):
    """
    First layer shared by every study: medium parameters and pool size.
    """
    study.add_layer('Inputs')

    @study.add_wrapped()
    def params(config):
        return config.params

    @study.add_wrapped()
    def workers(config):
        return config.threads


def _increases(errors):
    return int(np.sum(np.diff(np.asarray(errors)) > 0))


# =============================================================================
# MEDIUM
# =============================================================================

@register('medium')
def medium_study():
    study = Study('medium')
    _inputs(study)
    study.add_layer('Medium samples')

    @study.add_wrapped(tags=['artifact'])
    def medium_table(config, params):
        num = config.numerics
        table = realization_csv(
            params, num['eps'], z_max=num['L'] / num['eps'], dz=0.1,
            seed=config.master_seed, n_modes=num['n_modes'])
        return Artifact('medium.csv', table)

    @study.add_wrapped()
    def correlation_table(config, params):
        grid = build_spectral_grid(params, config.numerics['n_modes'])
        z = np.concatenate([[0.0], np.logspace(-2, 3, 51)])
        exact = np.array([autocorrelation(params, zi) for zi in z])
        table = pd.DataFrame({
            'z': z, 'R': exact,
            'R_grid': grid_autocorrelation(grid, z),
            'R_rule': SpectralRule(params).autocorrelation(z),
        })
        if regime(params.gamma)['regime'] == 'long_range':
            with np.errstate(divide='ignore'):
                table['R_tail'] = tail_constants(params).r0 * z ** -params.gamma
        return table

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def autocorrelation_artifact(correlation_table):
        return Artifact('autocorrelation.csv', correlation_table)

    @study.add_wrapped(tags=['check'])
    def grid_check(correlation_table):
        t = correlation_table[correlation_table['z'] <= 100]
        err = np.max(np.abs(t['R_grid'] - t['R']) / t['R'])
        return Check.at_most('grid_autocorrelation', err, 1e-2)

    return study


# =============================================================================
# SCATTERING COEFFICIENTS
# =============================================================================

@register('coefficients')
def coefficients_study():
    study = Study('coefficients')
    _inputs(study)
    study.add_layer('Coefficients')

    @study.add_wrapped()
    def coefficient_table(config, params):
        rule = SpectralRule(params)
        rows = []
        for omega in config.numerics['omegas']:
            p_space = scattering_coefficients(params, omega)
            t_space = time_domain_coefficients(params, omega, rule=rule)
            rows.append({
                'omega': omega,
                'gamma_c': p_space.gamma_c, 'gamma_s': p_space.gamma_s,
                'gamma_c_time': t_space.gamma_c, 'gamma_s_time': t_space.gamma_s,
                'rel_err_c': abs(t_space.gamma_c / p_space.gamma_c - 1),
                'rel_err_s': abs(t_space.gamma_s / p_space.gamma_s - 1),
            })
        return pd.DataFrame(rows)

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def coefficients_artifact(coefficient_table):
        return Artifact('coefficients.csv', coefficient_table)

    @study.add_wrapped(tags=['check'])
    def dual_route_check(config, coefficient_table):
        err = coefficient_table[['rel_err_c', 'rel_err_s']].to_numpy().max()
        return Check.at_most('dual_route', err, config.tol('dual_route'))

    return study


@register('limit-check')
def limit_check_study():
    study = Study('limit-check')
    _inputs(study)
    study.add_layer('Rescaled coefficients')

    @study.add_wrapped()
    def limit_table(config, params):
        omega = config.numerics['omega']
        target = limit_coefficients(params, omega)
        rows = []
        for l0 in sorted(config.numerics['l0_ladder'], reverse=True):
            scaled = scaled_coefficients(params, omega, l0)
            # gamma_s tends to 0 outside the long-range regime
            norm_s = abs(target.gamma_s) or abs(target.gamma_c)
            rows.append({
                'l0': l0,
                'gamma_c': scaled.gamma_c, 'gamma_s': scaled.gamma_s,
                'limit_c': target.gamma_c, 'limit_s': target.gamma_s,
                'err_c': abs(scaled.gamma_c - target.gamma_c) / abs(target.gamma_c),
                'err_s': abs(scaled.gamma_s - target.gamma_s) / norm_s,
            })
        return pd.DataFrame(rows)

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def limit_artifact(limit_table):
        return Artifact('limit_check.csv', limit_table)

    @study.add_wrapped(tags=['check'])
    def limit_checks(config, params, limit_table):
        last = limit_table.iloc[-1]
        checks = [
            Check.at_most('limit_error_c', last['err_c'], config.tol('gamma_limit')),
            Check.at_most('limit_monotone_c', _increases(limit_table['err_c']), 0),
        ]
        if regime(params.gamma)['regime'] == 'long_range':
            checks += [
                Check.at_most('limit_error_s', last['err_s'], config.tol('gamma_limit')),
                Check.at_most('limit_monotone_s', _increases(limit_table['err_s']), 0),
            ]
        return checks

    return study


# =============================================================================
# TRANSMITTED PULSE
# =============================================================================

@register('pulse')
def pulse_study():
    study = Study('pulse')
    _inputs(study)
    study.add_layer('Source and grids')

    @study.add_wrapped()
    def source(config):
        num = config.numerics
        return gaussian_source(omega_cut=num['omega_cut'], omega_max=num['omega_max'])

    @study.add_wrapped()
    def s_grid(config):
        num = config.numerics
        return np.linspace(num['s_min'], num['s_max'], num['n_s'])

    study.add_layer('Fronts')

    @study.add_wrapped()
    def homogeneous_front(config, params, source, s_grid, workers):
        return pulse_front(source, params, config.numerics['L'], mode='homogeneous',
                           s_grid=s_grid, y_grid=config.numerics['y_grid'],
                           workers=workers)

    @study.add_wrapped()
    def random_fronts(config, params, source, s_grid, workers):
        # The configured medium first, then every compared beta
        fronts = {}
        for beta in [params.beta] + list(config.numerics['compare_beta']):
            if beta in fronts:
                continue
            fronts[beta] = pulse_front(
                source, params.replace(beta=beta), config.numerics['L'],
                mode='finite_l0', s_grid=s_grid, y_grid=config.numerics['y_grid'],
                workers=workers)
        return fronts

    @study.add_wrapped()
    def limit_front(config, params, source, s_grid, workers):
        return pulse_front(source, params, config.numerics['L'], mode='limit',
                           s_grid=s_grid, y_grid=config.numerics['y_grid'],
                           workers=workers)

    @study.add_wrapped()
    def centroid(source):
        return spectral_centroid(source)

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def pulse_artifact(params, homogeneous_front, random_fronts, limit_front):
        return Artifact('pulse.csv', pulse_table(
            homogeneous_front, random_fronts[params.beta], limit_front,
            {b: f for b, f in random_fronts.items() if b != params.beta}))

    @study.add_wrapped(tags=['check'])
    def homogeneous_checks(config, params, homogeneous_front, s_grid):
        if not np.any(np.asarray(config.numerics['y_grid']) == 0):
            return []
        exact = homogeneous_front_on_axis(s_grid, config.numerics['L'], params.c0)
        trace = homogeneous_front.at(0.0)
        i = int(np.argmax(np.abs(exact)))
        peak = abs(exact[i])
        return [
            Check.at_most('homogeneous_peak', abs(trace[i] - exact[i]) / peak,
                          config.tol('homogeneous_peak')),
            Check.at_most('homogeneous_abs', np.max(np.abs(trace - exact)) / peak,
                          config.tol('homogeneous_abs')),
        ]

    @study.add_wrapped(tags=['check'])
    def attenuation_checks(config, params, homogeneous_front, random_fronts,
                           limit_front, centroid):
        compared = {b: random_fronts[b] for b in config.numerics['compare_beta']}
        checks = [
            Check(f'attenuated_beta_{beta:.6g}', front.peak / homogeneous_front.peak,
                  1.0, bool(front.peak < homogeneous_front.peak))
            for beta, front in compared.items()
        ]
        checks.append(Check(
            'attenuated_limit', limit_front.peak / homogeneous_front.peak,
            1.0, bool(limit_front.peak < homogeneous_front.peak)))
        if len(compared) == 2:
            (b1, f1), (b2, f2) = compared.items()
            g1 = scattering_coefficients(params.replace(beta=b1), centroid).gamma_c
            g2 = scattering_coefficients(params.replace(beta=b2), centroid).gamma_c
            # Stronger attenuation rate gives the lower peak
            agree = np.sign(f2.peak - f1.peak) == np.sign(g1 - g2)
            checks.append(Check(
                'beta_ordering', float(agree), 1.0, bool(agree),
                f'Gamma_c at centroid {centroid:.4g}: {g1:.6g} vs {g2:.6g}'))
        return checks

    return study


# =============================================================================
# COUPLED-MODE MONTE CARLO
# =============================================================================

@register('mc')
def mc_study():
    study = Study('mc')
    _inputs(study)
    study.add_layer('Ensemble')

    @study.add_wrapped()
    def channels(config, params):
        num = config.numerics
        kappa = num['kappa'][0]
        main = Channel.admissible(num['omega'], kappa, num['eps'], params.c0)
        pair = [Channel.admissible(om, kappa, num['eps'], params.c0)
                for om in num['omega_pair']]
        return [main] + pair

    @study.add_wrapped()
    def ensemble(config, params, channels, workers):
        num = config.numerics
        return mode_ensemble(params, num['eps'], channels, num['L'], num['n_real'],
                             master_seed=config.master_seed, workers=workers,
                             n_modes=num['n_modes'])

    study.add_layer('Moments')

    @study.add_wrapped()
    def moments(config, params, ensemble):
        num = config.numerics
        x = 1 / np.conj(ensemble.a_comp[:, 1])
        y = 1 / ensemble.a_comp[:, 2]
        return {
            'transmission': MomentEstimate.from_samples(ensemble.transmission[:, 0]),
            'backscatter': MomentEstimate.from_samples(ensemble.backscatter[:, 0]),
            'covariance': MomentEstimate.from_samples((x - x.mean()) * (y - y.mean())),
            'closed_form': closed_form_moment(params, num['omega'], num['L']),
        }

    @study.add_wrapped()
    def ladder(config, params, workers):
        num = config.numerics
        return transmission_ladder(
            params, num['eps_ladder'], num['omega'], num['L'], num['n_real'],
            kappa_mag=num['kappa'][0], master_seed=config.master_seed,
            workers=workers, n_modes=num['n_modes'])

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def mc_artifact(config, moments, ladder):
        num = config.numerics
        return Artifact('mc.json', {
            'eps': num['eps'], 'omega': num['omega'], 'L': num['L'],
            'n_real': num['n_real'], 'omega_pair': num['omega_pair'],
            'transmission': moments['transmission'].to_dict(moments['closed_form']),
            'backscatter': moments['backscatter'].to_dict(0.0),
            'covariance': moments['covariance'].to_dict(0.0),
            'ladder': ladder.to_dict('records'),
        })

    @study.add_wrapped(tags=['check'])
    def mc_checks(config, moments, ladder):
        bound = config.tol('z_score')
        z = lambda est, target: max(abs(v) for v in est.z_scores(target))
        return [
            Check.at_most('transmission_z', z(moments['transmission'], moments['closed_form']), bound),
            Check.at_most('backscatter_z', z(moments['backscatter'], 0.0), bound),
            Check.at_most('covariance_z', z(moments['covariance'], 0.0), bound),
            # Error against the closed form shrinks as eps decreases
            Check.at_most('transmission_trend',
                          trend_violations(ladder['error'], ladder['stderr'], z=bound), 0,
                          f"errors {np.round(ladder['error'].to_numpy(), 4).tolist()}"),
        ]

    return study


# =============================================================================
# LIMIT DIFFUSION
# =============================================================================

@register('sde')
def sde_study():
    study = Study('sde')
    _inputs(study)
    study.add_layer('Diffusion')

    @study.add_wrapped()
    def sde_estimate(config, params):
        num = config.numerics
        return sde_moment(params, num['omega'], num['L'], dz=num['sde_dz'],
                          n_paths=num['n_paths'], seed=config.master_seed,
                          scheme=num['sde_scheme'])

    @study.add_wrapped()
    def modes_estimate(config, params, workers):
        num = config.numerics
        channel = Channel.admissible(num['omega'], num['kappa'][0], num['eps'], params.c0)
        return transmission_moment(params, num['eps'], channel, num['L'], num['n_real'],
                                   master_seed=config.master_seed, workers=workers,
                                   n_modes=num['n_modes'])

    @study.add_wrapped()
    def defects(config, params):
        num = config.numerics
        h = num['defect_dz']
        run = lambda scheme, dz: simulate_sde(
            params, num['omega'], num['L'], dz=dz, seed=config.master_seed,
            n_paths=100, scheme=scheme, n_record=11, tol=1.0).max_defect
        return {
            'midpoint': run('midpoint', h),
            'heun': run('heun', h),
            'heun_coarse': run('heun', 2 * h),
        }

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def sde_artifact(config, params, sde_estimate, modes_estimate, defects):
        num = config.numerics
        target = closed_form_moment(params, num['omega'], num['L'])
        return Artifact('sde.json', {
            'omega': num['omega'], 'L': num['L'], 'dz': num['sde_dz'],
            'scheme': num['sde_scheme'],
            'moment': sde_estimate.to_dict(target),
            'modes': modes_estimate.to_dict(target), 'eps': num['eps'],
            'sde_vs_modes_z': max(abs(v) for v in sde_estimate.z_against(modes_estimate)),
            'defects': defects, 'defect_dz': num['defect_dz'],
        })

    @study.add_wrapped(tags=['check'])
    def sde_checks(config, params, sde_estimate, modes_estimate, defects):
        num = config.numerics
        target = closed_form_moment(params, num['omega'], num['L'])
        ratio = defects['heun_coarse'] / max(defects['heun'], 1e-300)
        return [
            Check.at_most('sde_z', max(abs(v) for v in sde_estimate.z_scores(target)),
                          config.tol('z_score')),
            Check.at_most('sde_vs_modes_z',
                          max(abs(v) for v in sde_estimate.z_against(modes_estimate)),
                          config.tol('z_score')),
            Check.at_most('midpoint_defect', defects['midpoint'], config.tol('defect_sde')),
            # Heun defect is first order in the step
            Check('heun_defect_order', ratio, 1.8, bool(ratio >= 1.8)),
        ]

    return study


# =============================================================================
# TRAVEL TIME
# =============================================================================

@register('travel-time')
def travel_time_study():
    study = Study('travel-time')
    _inputs(study)
    study.add_layer('Ensembles')

    @study.add_wrapped()
    def scaling(config, params, workers):
        num = config.numerics
        return scaling_study(params, num['L'], num['eps_ladder'], num['n_travel'],
                             master_seed=config.master_seed, workers=workers,
                             n_modes=num['n_modes'])

    @study.add_wrapped()
    def hurst(config, params, workers):
        num = config.numerics
        return hurst_estimate(params, num['hurst_eps'], num['L'], num['n_hurst'],
                              master_seed=config.master_seed, n_modes=num['n_modes'],
                              linear_eps=num['hurst_linear_eps'], workers=workers)

    @study.add_wrapped()
    def delay(config, params, workers):
        num = config.numerics
        return delay_limit(params, [num['delay_eps']], num['L'], num['n_delay'],
                           master_seed=config.master_seed, workers=workers,
                           n_modes=num['n_modes'])

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def travel_time_artifact(scaling, hurst, delay):
        table = scaling.table[['eps', 'var', 'var_theory', 'ratio', 'ratio_limit']].copy()
        table['slope_fit'] = scaling.slope
        table['H'] = hurst.hurst
        table['H_ci'] = f'{hurst.ci[0]:.6g}:{hurst.ci[1]:.6g}'
        table['H_linear'] = hurst.hurst_linear
        table = table.merge(
            delay[['eps', 'delay_mean', 'delay_stderr', 'delay_theory']],
            on='eps', how='outer').sort_values('eps', ignore_index=True)
        return Artifact('travel_time.csv', table)

    @study.add_wrapped(tags=['check'])
    def travel_time_checks(config, params, scaling, hurst, delay):
        L = config.numerics['L']
        checks = []
        if not scaling.log_corrected:
            checks.append(Check.within(
                'variance_slope', scaling.slope, scaling.expected_slope,
                config.tol('slope')))
            # Deterministic convergence of the prediction to its limit
            eps_small = 1e-8
            ratio = travel_time_variance(params, eps_small, L) / \
                travel_time_scale(params.gamma, eps_small) ** 2
            constant = travel_time_variance_constant(params, L)
            checks.append(Check.at_most(
                'variance_constant', abs(ratio / constant - 1),
                config.tol('variance_constant')))
        last = scaling.table.iloc[-1]
        checks.append(Check.at_most(
            'variance_prediction', abs(last['var'] / last['var_theory'] - 1),
            config.tol('variance_constant')))
        checks.append(Check.within(
            'hurst', hurst.hurst, hurst.expected, config.tol('hurst')))
        checks.append(Check.within(
            'hurst_linear', hurst.hurst_linear, hurst.expected, config.tol('hurst')))
        row = delay.iloc[-1]
        checks.append(Check.at_most(
            'delay', abs(row['delay_mean'] / row['delay_theory'] - 1), config.tol('delay')))
        return checks

    return study


# =============================================================================
# KRAMERS-KRONIG
# =============================================================================

@register('kk')
def kk_study():
    study = Study('kk')
    _inputs(study)
    study.add_layer('Hilbert transforms')

    @study.add_wrapped()
    def kk_result(config, params):
        return kk_residual(params, omega_band=tuple(config.numerics['kk_band']))

    @study.add_wrapped()
    def calibration(config):
        omega = np.linspace(0.0, 256.0, 16385)
        even, odd = lorentzian_pair(omega)
        return kk_pair_residual(omega, even, odd, tuple(config.numerics['kk_band']))

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def kk_artifact(kk_result):
        return Artifact('kk.csv', kk_result.table)

    @study.add_wrapped(tags=['check'])
    def kk_checks(config, kk_result, calibration):
        return [
            Check.at_most('kk_cos', kk_result.residual_c, config.tol('kk')),
            Check.at_most('kk_sin', kk_result.residual_s, config.tol('kk')),
            Check.at_most('lorentzian', max(calibration.residuals), config.tol('lorentzian')),
        ]

    return study


# =============================================================================
# FRACTIONAL OPERATORS
# =============================================================================

@register('weyl')
def weyl_study():
    study = Study('weyl')
    _inputs(study)
    study.add_layer('Operators')

    @study.add_wrapped()
    def eigen_table(config):
        gamma_frac = config.numerics['weyl_gamma']
        rate = 1.0
        f = SampledSignal.from_function(lambda s: np.exp(rate * s),
                                        np.linspace(-40.0, 2.0, 4201))
        numeric = weyl_derivative(f, gamma_frac)
        exact = rate ** gamma_frac * f.values
        return pd.DataFrame({'s': f.s_grid, 'exact': exact, 'numeric': numeric.values})

    @study.add_wrapped()
    def memory_table(config, params):
        psi = SampledSignal.from_function(lambda s: np.exp(-s ** 2),
                                          np.linspace(-10.0, 10.0, 2001))
        limit = apply_limit_operator(psi, params).values
        norm = np.linalg.norm(limit)
        rule = SpectralRule(params)
        rows = []
        for l0 in sorted(config.numerics['l0_ladder'], reverse=True):
            out = apply_memory_operator(psi, params, l0=l0, rule=rule).values
            rows.append({'l0': l0, 'distance': np.linalg.norm(out - limit) / norm})
        return pd.DataFrame(rows)

    study.add_layer('Checks')

    @study.add_wrapped(tags=['artifact'])
    def weyl_artifacts(eigen_table, memory_table):
        return [Artifact('weyl.csv', eigen_table), Artifact('memory.csv', memory_table)]

    @study.add_wrapped(tags=['check'])
    def weyl_checks(config, eigen_table, memory_table):
        t = eigen_table[eigen_table['s'] >= -5]
        err = np.max(np.abs(t['numeric'] - t['exact']) / np.abs(t['exact']))
        return [
            Check.at_most('weyl_eigenfunction', err, config.tol('weyl')),
            Check.at_most('memory_convergence', _increases(memory_table['distance']), 0),
        ]

    return study
