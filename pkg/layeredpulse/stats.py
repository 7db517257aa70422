"""
Monte Carlo study of the random travel time, its scaling law, the Hurst
index of its fluctuation process and the deterministic arrival delay.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from layeredpulse.correlation import (
    SpectralRule, delay_constant, limit_coefficients, rank_one_factor, regime,
    tail_constants, travel_time_scale)
from layeredpulse.medium import (
    RESAMPLE_STREAM, HomogeneousMedium, RandomMedium, build_spectral_grid,
    spawn_stream, spawn_streams)

logger = logging.getLogger(__name__)


@dataclass
class TravelTimeSample:
    """
    Travel times of `n` realizations at one eps.

    `t0` is L/c0 + (1/(2 c0)) int nu(z/eps) dz, `t_char` the characteristic
    travel time int sqrt(1 + nu(z/eps)) / c0 dz and `delay` their
    difference. `paths`, when recorded, holds the running integral of
    nu(z/eps) on `z`.
    """
    eps: float
    t0: np.ndarray
    t_char: np.ndarray
    delay: np.ndarray
    z: Optional[np.ndarray] = None
    paths: Optional[np.ndarray] = None

    @property
    def n(self):
        return len(self.t0)

    def to_frame(self):
        return pd.DataFrame({
            'eps': self.eps, 't0': self.t0, 't_char': self.t_char, 'delay': self.delay
        })


def _travel_batch(params, eps, L, grid, master_seed, indices, n_pairs, stride,
                  homogeneous):
    h = L / (2 * n_pairs)
    if homogeneous:
        medium = HomogeneousMedium(len(indices))
    else:
        medium = RandomMedium.from_seed(params, eps, grid, master_seed, indices)
    n = medium.n
    int_nu = np.zeros(n)
    int_sqrt = np.zeros(n)
    paths = np.zeros((n, n_pairs // stride + 1))
    f0 = medium.nu
    for i in range(n_pairs):
        medium.advance(h / eps)
        f1 = medium.nu
        medium.advance(h / eps)
        f2 = medium.nu
        # Simpson over [2 i h, 2 (i + 1) h]
        int_nu += h * (f0 + 4 * f1 + f2) / 3
        int_sqrt += h * (np.sqrt(1 + f0) + 4 * np.sqrt(1 + f1) + np.sqrt(1 + f2)) / 3
        if (i + 1) % stride == 0:
            paths[:, (i + 1) // stride] = int_nu
        f0 = f2
    return int_nu, int_sqrt, paths


def travel_time_ensemble(params, eps, L, n, master_seed=0, dz=None, n_modes=512,
                         n_record=2, batch_size=50, workers=1, homogeneous=False):
    """
    Integrate nu(z/eps) along `n` realizations by Simpson's rule.

    Parameters
    ----------
    params : MediumParams
    eps : float
    L : float
    n : int
        Number of realizations, at least 2.
    master_seed : int, default 0
    dz : float, optional
        Quadrature step, default eps / 10.
    n_modes : int, default 512
    n_record : int, default 2
        Recorded points of the running integral, including both ends.
    batch_size : int, default 50
    workers : int, default 1
    homogeneous : bool, default False
        Switch the medium off.

    Returns
    -------
    TravelTimeSample
    """
    if n < 2:
        raise ValueError(f"At least 2 realizations are required, got {n}.")
    if eps <= 0 or L <= 0:
        raise ValueError("Scaling `eps` and thickness `L` must be positive.")
    dz = eps / 10 if dz is None else dz
    segments = max(1, n_record - 1)
    # Pairs of Simpson steps, a whole number of them per recorded segment
    stride = max(1, int(np.ceil(L / (2 * dz * segments) - 1e-9)))
    n_pairs = stride * segments
    grid = None if homogeneous else build_spectral_grid(params, n_modes)
    batches = [range(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]

    def run(indices):
        return _travel_batch(params, eps, L, grid, master_seed, indices,
                             n_pairs, stride, homogeneous)

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        results = list(pool.map(run, batches))
    int_nu = np.concatenate([r[0] for r in results])
    int_sqrt = np.concatenate([r[1] for r in results])
    c0 = params.c0
    t0 = L / c0 + int_nu / (2 * c0)
    t_char = int_sqrt / c0
    sample = TravelTimeSample(eps=eps, t0=t0, t_char=t_char, delay=t0 - t_char)
    if n_record > 2:
        sample.z = np.linspace(0, L, segments + 1)
        sample.paths = np.concatenate([r[2] for r in results])
    logger.info("Travel times: %d realizations at eps=%g", n, eps)
    return sample


def travel_time_variance(params, eps, L, rule=None, rank_one=False):
    """
    Second-order prediction of Var[T0 - L/c0],

        2 eps (theta'_0^2 eps / (4 c0^2)) int_0^{L/eps} (L - eps t) R(t) dt,

    with R integrated in closed form node by node of a `SpectralRule`.

    With `rank_one`, theta'_0^2 eps is replaced by the first Hermite
    factor of the bounded nonlinearity at this eps, the leading covariance
    of nu itself.
    """
    rule = SpectralRule(params) if rule is None else rule
    T = L / eps
    x = rule.rates * T
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    f0 = np.where(small, 1 - x / 2, -np.expm1(-x) / safe)
    f1 = np.where(small, 0.5 - x / 3, (-np.expm1(-x) - x * np.exp(-x)) / safe ** 2)
    integral = float(rule.weights @ (L * T * f0 - eps * T ** 2 * f1))
    if rank_one:
        amplitude = rank_one_factor(params, eps)
    else:
        amplitude = params.theta_prime0 ** 2 * eps
    return 2 * eps * amplitude / (4 * params.c0 ** 2) * integral


def travel_time_variance_constant(params, L):
    """
    Limit of Var[T0 - L/c0] / sigma_eps^2 as eps -> 0.

    gamma in (0, 1): theta'_0^2 R0 L^(2H) / (4 c0^2 H (2H - 1)), H = 1 - gamma/2;
    gamma = 1: theta'_0^2 R0 L / c0^2; gamma > 1: theta'_0^2 Gamma_0 L / (4 c0^2).
    """
    theta2 = params.theta_prime0 ** 2
    c0 = params.c0
    law = regime(params.gamma)['regime']
    if law == 'long_range':
        H = params.hurst
        r0 = tail_constants(params).r0
        return theta2 * r0 * L ** (2 * H) / (4 * c0 ** 2 * H * (2 * H - 1))
    elif law == 'critical':
        return theta2 * tail_constants(params).r0 * L / c0 ** 2
    gamma0 = limit_coefficients(params, 1.0).gamma_c
    return theta2 * gamma0 * L / (4 * c0 ** 2)


def expected_variance_slope(gamma):
    return 1 + gamma if gamma < 1 else 2.0


def _fit_slope(x, y):
    """
    Least-squares slope of log y against log x with its standard error.
    """
    lx, ly = np.log(x), np.log(y)
    coeffs, cov = np.polyfit(lx, ly, 1, cov=True) if len(x) > 3 else (np.polyfit(lx, ly, 1), None)
    stderr = float(np.sqrt(cov[0, 0])) if cov is not None else float('nan')
    return float(coeffs[0]), stderr


@dataclass
class ScalingStudy:
    """
    Variance scaling of the travel time over an eps ladder. `slope` is fitted
    to the variance with the Hermite amplitude of the nonlinearity divided
    out, `slope_raw` to the variance itself.
    """
    table: pd.DataFrame
    slope: float
    slope_raw: float
    slope_stderr: float
    sd_slope: float
    expected_slope: float
    expected_sd_slope: float
    log_corrected: bool


def scaling_study(params, L, eps_ladder, n, master_seed=0, **kwargs):
    """
    Fit the exponent of Var[T0 - L/c0] against eps, and of the standard
    deviation of T0 / eps.

    The bounded nonlinearity scales the variance by the rank-one factor
    rho(eps) = Theta_1 / (theta'_0^2 eps), which tends to 1 but drifts along
    a coarse ladder. Both fits use the variance divided by rho.

    Returns
    -------
    ScalingStudy
    """
    eps_ladder = sorted(float(e) for e in eps_ladder)
    if len(eps_ladder) < 3:
        raise ValueError(f"At least 3 ladder points are required, got {len(eps_ladder)}.")
    rule = SpectralRule(params)
    constant = travel_time_variance_constant(params, L)
    rows = []
    for eps in eps_ladder:
        sample = travel_time_ensemble(params, eps, L, n, master_seed, **kwargs)
        var = float(np.var(sample.t0 - L / params.c0, ddof=1))
        sigma = travel_time_scale(params.gamma, eps)
        rho = rank_one_factor(params, eps) / (params.theta_prime0 ** 2 * eps)
        rows.append({
            'eps': eps, 'var': var,
            'var_theory': travel_time_variance(params, eps, L, rule=rule, rank_one=True),
            'rank_one': rho, 'var_linear': var / rho,
            'ratio': var / rho / sigma ** 2, 'ratio_limit': constant,
            'sd_scaled': float(np.std(sample.t0 / eps, ddof=1) / np.sqrt(rho)),
            'delay_mean': float(np.mean(sample.delay)),
        })
    table = pd.DataFrame(rows)
    slope, slope_err = _fit_slope(table['eps'], table['var_linear'])
    slope_raw, _ = _fit_slope(table['eps'], table['var'])
    sd_slope, _ = _fit_slope(table['eps'], table['sd_scaled'])
    gamma = params.gamma
    expected = expected_variance_slope(gamma)
    logger.info("Variance slope %.3f (expected %.3f)", slope, expected)
    return ScalingStudy(
        table=table, slope=slope, slope_raw=slope_raw, slope_stderr=slope_err,
        sd_slope=sd_slope, expected_slope=expected, expected_sd_slope=expected / 2 - 1,
        log_corrected=regime(gamma)['regime'] == 'critical',
    )


def _integrated_ou_factors(grid, dt):
    """
    Joint exact update over a fast time dt of each OU mode V and its
    integral I: V' = a V + xi1, I = b V + xi2 with the Cholesky factors of
    the (xi1, xi2) covariance.
    """
    g, w = grid.rates, grid.weights
    x = g * dt
    a = np.exp(-x)
    one_minus = -np.expm1(-x)
    s11 = w * -np.expm1(-2 * x)
    s12 = w * one_minus ** 2 / g
    series = (2 / 3) * x ** 3 - 0.5 * x ** 4 + (7 / 30) * x ** 5 - x ** 6 / 12
    f = np.where(x < 1e-2, series, 2 * x - 3 + 4 * a - a ** 2)
    s22 = w * f / g ** 2
    l11 = np.sqrt(s11)
    l21 = s12 / l11
    l22 = np.sqrt(np.maximum(s22 - l21 ** 2, 0.0))
    return a, one_minus / g, l11, l21, l22


def integrated_medium_paths(params, eps, L, n_paths, master_seed=0, n_record=1025,
                            n_modes=512):
    """
    Paths of the Gaussian part of the travel-time fluctuation,
    (theta'_0 sqrt(eps) / (2 c0)) int_0^z V(s/eps) ds, sampled exactly on a
    uniform z-grid by the joint update of every mode and its integral.

    Returns
    -------
    z, paths : numpy.ndarray
    """
    grid = build_spectral_grid(params, n_modes)
    z = np.linspace(0, L, n_record)
    dt = (z[1] - z[0]) / eps
    a, b, l11, l21, l22 = _integrated_ou_factors(grid, dt)
    streams = spawn_streams(master_seed, range(n_paths))
    paths = np.zeros((n_paths, n_record))
    for p, rng in enumerate(streams):
        v = np.sqrt(grid.weights) * rng.standard_normal(grid.n_modes)
        noise = rng.standard_normal((n_record - 1, 2, grid.n_modes))
        total = 0.0
        for k in range(n_record - 1):
            xi1, xi2 = noise[k]
            total += float(np.sum(b * v + l21 * xi1 + l22 * xi2))
            v = a * v + l11 * xi1
            paths[p, k + 1] = total
    # Fast-time integral to z-integral
    scale = params.theta_prime0 * np.sqrt(eps) * eps / (2 * params.c0)
    return z, scale * paths


def aggregated_variance_hurst(paths, block_sizes=None, min_block=4):
    """
    Hurst index from the ensemble variance of non-overlapping block
    increments of zero-mean paths, Var ~ m^(2H).

    Parameters
    ----------
    paths : numpy.ndarray
        Array (n_paths, n_points) of paths starting at 0.
    block_sizes : list of int, optional
        Default powers of two from `min_block` up to a quarter of the path.
    """
    paths = np.atleast_2d(paths)
    n_points = paths.shape[1]
    if block_sizes is None:
        top = int(np.log2((n_points - 1) // 4))
        block_sizes = [2 ** k for k in range(int(np.log2(min_block)), top + 1)]
    if len(block_sizes) < 2:
        raise ValueError("At least two block sizes are required.")
    variances = []
    for m in block_sizes:
        increments = np.diff(paths[:, ::m], axis=1)
        variances.append(np.mean(increments ** 2))
    slope, _ = _fit_slope(np.array(block_sizes, dtype=float), np.array(variances))
    return slope / 2


def dfa_hurst(paths, scales=None, min_scale=8):
    """
    Detrended fluctuation analysis of order one on the path profiles.
    """
    paths = np.atleast_2d(paths)
    n_points = paths.shape[1]
    if scales is None:
        top = int(np.log2(n_points // 4))
        scales = [2 ** k for k in range(int(np.log2(min_scale)), top + 1)]
    fluct = []
    for s in scales:
        n_win = n_points // s
        windows = paths[:, :n_win * s].reshape(len(paths), n_win, s)
        t = np.arange(s)
        # Linear trend removed window by window
        design = np.vstack([t, np.ones(s)]).T
        coef, *_ = np.linalg.lstsq(design, windows.reshape(-1, s).T, rcond=None)
        resid = windows.reshape(-1, s).T - design @ coef
        fluct.append(np.sqrt(np.mean(resid ** 2)))
    slope, _ = _fit_slope(np.array(scales, dtype=float), np.array(fluct))
    return slope


def fractional_gaussian_noise(n, hurst, rng):
    """
    Fractional Gaussian noise of unit variance by the Davies-Harte
    circulant embedding.
    """
    if not 0 < hurst < 1:
        raise ValueError(f"Hurst index must lie in (0, 1), got {hurst}.")
    k = np.arange(n)
    rho = 0.5 * (np.abs(k + 1.0) ** (2 * hurst) + np.abs(k - 1.0) ** (2 * hurst)
                 - 2 * np.abs(k) ** (2 * hurst))
    row = np.concatenate([rho, [0.0], rho[:0:-1]])
    eig = np.fft.fft(row).real
    if np.any(eig < -1e-10):
        raise ValueError(
            f"Circulant embedding is not nonnegative for n={n}, hurst={hurst}.")
    eig = np.maximum(eig, 0.0)
    m = 2 * n
    z = np.zeros(m, dtype=complex)
    z[0] = rng.standard_normal()
    z[n] = rng.standard_normal()
    v = rng.standard_normal((n - 1, 2))
    z[1:n] = (v[:, 0] + 1j * v[:, 1]) / np.sqrt(2)
    z[n + 1:] = np.conj(z[1:n][::-1])
    return np.sqrt(m) * np.fft.ifft(np.sqrt(eig) * z).real[:n]


@dataclass
class HurstEstimate:
    hurst: float
    ci: tuple
    hurst_dfa: float
    expected: float
    hurst_linear: float = float('nan')

    def to_dict(self):
        return {'H': self.hurst, 'H_ci': list(self.ci), 'H_dfa': self.hurst_dfa,
                'H_linear': self.hurst_linear, 'H_expected': self.expected}


def hurst_from_paths(paths, master_seed=0, n_boot=200, level=0.95, **kwargs):
    """
    Aggregated-variance Hurst index with a bootstrap interval over paths
    and the DFA cross-check.
    """
    paths = np.atleast_2d(paths)
    estimate = aggregated_variance_hurst(paths, **kwargs)
    rng = spawn_stream(master_seed, 0, domain=RESAMPLE_STREAM)
    boot = np.array([
        aggregated_variance_hurst(paths[rng.integers(0, len(paths), len(paths))], **kwargs)
        for _ in range(n_boot)
    ])
    tail = 100 * (1 - level) / 2
    ci = (float(np.percentile(boot, tail)), float(np.percentile(boot, 100 - tail)))
    return estimate, ci, dfa_hurst(paths)


def hurst_estimate(params, eps, L, n_paths, master_seed=0, n_record=1025,
                   n_modes=512, n_boot=200, linear_eps=None, workers=1, **kwargs):
    """
    Hurst index of the travel-time fluctuation process.

    The index is estimated on the running fluctuation (1/(2 c0)) int_0^z
    nu(s/eps) ds recorded by `travel_time_ensemble` on `n_record` points.
    The exactly sampled Gaussian linearization at `linear_eps` (default
    `eps`) gives the cross-check `hurst_linear`. Extra keyword arguments
    go to `aggregated_variance_hurst`.

    Returns
    -------
    HurstEstimate
    """
    sample = travel_time_ensemble(params, eps, L, n_paths, master_seed, n_modes=n_modes,
                                  n_record=n_record, workers=workers)
    paths = sample.paths / (2 * params.c0)
    h, ci, h_dfa = hurst_from_paths(paths, master_seed=master_seed, n_boot=n_boot, **kwargs)
    _, linear = integrated_medium_paths(
        params, eps if linear_eps is None else linear_eps, L, n_paths, master_seed,
        n_record=n_record, n_modes=n_modes)
    h_linear = aggregated_variance_hurst(linear, **kwargs)
    logger.info("Hurst index %.3f [%.3f, %.3f], DFA %.3f, linearized %.3f",
                h, ci[0], ci[1], h_dfa, h_linear)
    return HurstEstimate(hurst=h, ci=ci, hurst_dfa=h_dfa, expected=params.hurst,
                         hurst_linear=h_linear)


def delay_limit(params, eps_ladder, L, n, master_seed=0, **kwargs):
    """
    Mean arrival delay divided by eps along the ladder, with the limit
    theta'_0^2 R(0) L / (8 c0).

    Returns
    -------
    pandas.DataFrame
        Columns `eps`, `delay_mean`, `delay_stderr`, `delay_theory`.
    """
    theory = delay_constant(params, L)
    rows = []
    for eps in eps_ladder:
        sample = travel_time_ensemble(params, eps, L, n, master_seed, **kwargs)
        scaled = sample.delay / eps
        rows.append({
            'eps': eps, 'delay_mean': float(np.mean(scaled)),
            'delay_stderr': float(np.std(scaled, ddof=1) / np.sqrt(sample.n)),
            'delay_theory': theory,
            'positive_rate': float(np.mean(sample.delay > 0)),
        })
    return pd.DataFrame(rows)
