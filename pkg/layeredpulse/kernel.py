"""
Transmitted-front kernels and pulse synthesis.

The front kernel in the Fourier domain is

    K(omega, kappa, z) = exp(-theta'_0^2 omega^2 (Gamma_c + i Gamma_s) z / (8 c0^2))
                         * exp(-i omega c0 |kappa|^2 z / 2),

and the transmitted front is recovered by inverting K * Psi with the measure
omega^2 d omega d kappa / (2 pi)^3. Sources are radially symmetric in kappa,
so the transverse integral reduces to a Bessel J0 transform.
"""
import logging, warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy import integrate, special

from layeredpulse.correlation import (
    ScatteringCoefficients, SpectralRule, limit_gamma)
from layeredpulse.exceptions import NumericalWarning, QuadratureError

logger = logging.getLogger(__name__)

MODES = ('finite_l0', 'limit', 'homogeneous')


def gaussian_spectrum(omega, kappa):
    """
    Gaussian source spectrum 2 omega^2 exp(-omega^2 (1 + kappa^2)).
    """
    omega = np.asarray(omega, dtype=float)
    return 2 * omega ** 2 * np.exp(-omega ** 2 * (1 + np.asarray(kappa) ** 2))


@dataclass(frozen=True)
class Source:
    """
    Radially symmetric source spectrum and the bounds used to invert it.

    Parameters
    ----------
    psi_hat : callable
        Spectrum Psi(omega, |kappa|), even in omega.
    omega_cut : float, default 0.05
        Lower end of the frequency quadrature; the spectrum is taken as
        negligible on (0, omega_cut).
    omega_max : float, default 8.0
        Upper end of the frequency quadrature.
    kappa_max : float, optional
        Transverse support. If omitted, the transverse integral runs over the
        scaled variable q = |omega| |kappa| up to `q_max`.
    q_max : float, default 6.0
    n_omega : int, default 2048
        Number of trapezoid nodes in frequency.
    """
    psi_hat: Callable = gaussian_spectrum
    omega_cut: float = 0.05
    omega_max: float = 8.0
    kappa_max: Optional[float] = None
    q_max: float = 6.0
    n_omega: int = 2048

    def __post_init__(self):
        if not 0 <= self.omega_cut < self.omega_max:
            raise ValueError(
                f"Source bounds must satisfy 0 <= omega_cut < omega_max, got "
                f"{self.omega_cut}, {self.omega_max}."
            )
        if self.n_omega < 2:
            raise ValueError("Source `n_omega` must be at least 2.")

    def upper_q(self, omega):
        if self.kappa_max is None:
            return self.q_max
        return abs(omega) * self.kappa_max


def gaussian_source(**kwargs):
    return Source(psi_hat=gaussian_spectrum, **kwargs)


@dataclass
class PulseField:
    """
    Real front samples p(s, y1) with y2 = 0, stored with shape
    (len(y_grid), len(s_grid)).
    """
    s_grid: np.ndarray
    y_grid: np.ndarray
    values: np.ndarray
    imag_residue: Optional[float] = field(default=None)

    @property
    def peak(self):
        return float(np.max(np.abs(self.values)))

    def at(self, y):
        """
        Trace at the transverse offset closest to `y`.
        """
        return self.values[int(np.argmin(np.abs(self.y_grid - y)))]

    def to_frame(self, column='p'):
        s, y = np.meshgrid(self.s_grid, self.y_grid)
        return pd.DataFrame({
            's': s.ravel(), 'y1': y.ravel(), column: self.values.ravel()
        })


def pulse_table(homogeneous, medium, limit, compared=None):
    """
    Fronts on a shared (s, y1) grid as columns `s, y1, p_hom, p_medium,
    p_limit`, followed by one `p_medium_beta_<beta>` column per entry of
    `compared`.
    """
    fronts = [homogeneous, medium, limit] + list((compared or {}).values())
    shape = homogeneous.values.shape
    if any(f.values.shape != shape for f in fronts):
        raise ValueError("Fronts must share the same (s, y1) grid.")
    table = homogeneous.to_frame('p_hom')
    table['p_medium'] = medium.values.ravel()
    table['p_limit'] = limit.values.ravel()
    for beta, front in (compared or {}).items():
        table[f'p_medium_beta_{beta:.6g}'] = front.values.ravel()
    return table


def khat(coeffs, params, omega, kappa_mag, z):
    """
    Front kernel K(omega, kappa, z).

    Parameters
    ----------
    coeffs : ScatteringCoefficients, complex or array_like
        Gamma_c + i Gamma_s at `omega`.
    params : MediumParams
    omega, kappa_mag : float or array_like
    z : float
        Propagation distance, nonnegative.
    """
    if z < 0:
        raise ValueError(f"Distance `z` must be nonnegative, got {z}.")
    if isinstance(coeffs, ScatteringCoefficients):
        coeffs = coeffs.value
    omega = np.asarray(omega, dtype=float)
    kappa_mag = np.asarray(kappa_mag, dtype=float)
    scatter = params.theta_prime0 ** 2 * omega ** 2 * np.asarray(coeffs) * z / (8 * params.c0 ** 2)
    return np.exp(-scatter - 0.5j * omega * params.c0 * kappa_mag ** 2 * z)


def khat_limit(params, omega, kappa_mag, z):
    """
    Front kernel with the l0 -> 0 limit coefficients.
    """
    return khat(limit_gamma(params, omega), params, omega, kappa_mag, z)


def scattering_exponent(params, omega, mode, l0=1.0, rule=None):
    """
    Complex rate G(omega) such that the scattering factor of the kernel over
    a distance z is exp(-G z).
    """
    omega = np.asarray(omega, dtype=float)
    if mode == 'homogeneous':
        return np.zeros(omega.shape, dtype=complex)
    elif mode == 'finite_l0':
        rule = SpectralRule(params) if rule is None else rule
        gamma = rule.coefficients(omega, l0=l0)
    elif mode == 'limit':
        gamma = limit_gamma(params, omega)
    else:
        raise ValueError(f"Front `mode` must be one of {MODES}, got {mode!r}.")
    return params.theta_prime0 ** 2 * omega ** 2 * gamma / (8 * params.c0 ** 2)


def _radial_nodes(source, omega, c0, L, r_max, n_nodes=16):
    """
    Gauss-Legendre nodes in q = |omega| k resolving both the Gaussian
    envelope and the transverse chirp c0 L q^2 / (2 |omega|).
    """
    q_up = source.upper_q(omega)
    wavenumber = c0 * L * q_up / abs(omega) + r_max
    n_panels = max(8, int(np.ceil(wavenumber * q_up / (4 * np.pi))))
    x, w = special.roots_legendre(n_nodes)
    edges = np.linspace(0.0, q_up, n_panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    q = (half * x + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
    weights = (half * w).ravel()
    return q, weights


def _radial_transform(source, omega, r, c0, L, steps=None):
    """
    omega^2 times the transverse transform 2 pi int k J0(omega k r)
    Psi(omega, k) exp(-i omega c0 k^2 L / 2) dk, evaluated in q = |omega| k.

    `steps`, if given, lists the step lengths whose phase factors are
    multiplied in sequence instead of using the single factor at L.
    """
    q, weights = _radial_nodes(source, omega, c0, L, float(np.max(r, initial=0.0)))
    k = q / abs(omega)
    spectrum = source.psi_hat(omega, k)
    if steps is None:
        propagator = np.exp(-0.5j * omega * c0 * k ** 2 * L)
    else:
        propagator = np.ones(len(k), dtype=complex)
        for h in steps:
            propagator = propagator * np.exp(-0.5j * omega * c0 * k ** 2 * h)
    bessel = special.j0(np.multiply.outer(r, q))
    return 2 * np.pi * bessel @ (weights * q * spectrum * propagator)


def _frequency_grid(source, two_sided):
    omega = np.linspace(source.omega_cut, source.omega_max, source.n_omega)
    weights = np.full(source.n_omega, omega[1] - omega[0])
    weights[[0, -1]] *= 0.5
    if two_sided:
        omega = np.concatenate([-omega[::-1], omega])
        weights = np.concatenate([weights[::-1], weights])
    return omega, weights


def _synthesize(source, params, L, s_grid, y_grid, exponent, two_sided=False,
                workers=1, steps=None):
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    y_grid = np.atleast_1d(np.asarray(y_grid, dtype=float))
    if s_grid.size == 0 or y_grid.size == 0:
        raise ValueError("Front grids `s_grid` and `y_grid` must be nonempty.")
    if L < 0:
        raise ValueError(f"Slab thickness `L` must be nonnegative, got {L}.")
    omega, weights = _frequency_grid(source, two_sided)
    d_omega = (source.omega_max - source.omega_cut) / (source.n_omega - 1)
    if np.max(np.abs(s_grid)) > np.pi / d_omega:
        warnings.warn(
            f"Time window {np.max(np.abs(s_grid)):.3g} exceeds the alias-free "
            f"range {np.pi / d_omega:.3g} of the frequency grid.",
            NumericalWarning
        )
    factor = np.exp(-exponent(omega) * L)
    r = np.abs(y_grid)

    def transform(i):
        return _radial_transform(source, omega[i], r, params.c0, L, steps=steps)

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        radial = np.stack(list(pool.map(transform, range(len(omega)))))

    # Rows are frequencies, reduced with a single fixed-order product
    spectra = (weights * factor)[:, None] * radial
    phases = np.exp(-1j * np.multiply.outer(omega, s_grid))
    field_ = spectra.T @ phases / (2 * (2 * np.pi) ** 3)
    if two_sided:
        residue = float(np.max(np.abs(field_.imag)) / np.max(np.abs(field_.real)))
        return PulseField(s_grid, y_grid, field_.real, imag_residue=residue)
    # Conjugate symmetry of the integrand folds negative frequencies
    return PulseField(s_grid, y_grid, 2 * field_.real)


def pulse_front(source, params, L, mode='finite_l0', s_grid=None, y_grid=(0.0,),
                l0=1.0, two_sided=False, workers=1):
    """
    Transmitted front p(s, y1) at depth L.

    Parameters
    ----------
    source : Source
    params : MediumParams
    L : float
        Slab thickness.
    mode : {'finite_l0', 'limit', 'homogeneous'}, default 'finite_l0'
        Coefficients of the medium at correlation length `l0`, their l0 -> 0
        limit, or no medium.
    s_grid : array_like, optional
        Time offsets, default 401 points on [-10, 10].
    y_grid : array_like, default (0.0,)
        Transverse offsets y1.
    l0 : float, default 1.0
    two_sided : bool, default False
        Integrate over negative frequencies explicitly and record the
        imaginary residue instead of folding by conjugate symmetry.
    workers : int, default 1
        Threads used over frequency slices.

    Returns
    -------
    PulseField
    """
    s_grid = np.linspace(-10, 10, 401) if s_grid is None else s_grid
    rule = SpectralRule(params) if mode == 'finite_l0' else None
    exponent = lambda omega: scattering_exponent(params, omega, mode, l0=l0, rule=rule)
    front = _synthesize(source, params, L, s_grid, y_grid, exponent,
                        two_sided=two_sided, workers=workers)
    logger.info("Front %s at L=%g, peak %.6g", mode, L, front.peak)
    return front


def evolve_schrodinger(source, params, L, dz, mode='finite_l0', s_grid=None,
                       y_grid=(0.0,), l0=1.0, workers=1):
    """
    Step the transverse spectrum of the front from z = 0 to z = L with the
    exact exponential propagator of each step and synthesize the result.

    At L = 0 this returns half the source profile.
    """
    if dz <= 0:
        raise ValueError(f"Step `dz` must be positive, got {dz}.")
    n_steps = int(np.ceil(L / dz - 1e-12)) if L > 0 else 0
    steps = [dz] * max(n_steps - 1, 0)
    if n_steps:
        steps.append(L - dz * (n_steps - 1))
    s_grid = np.linspace(-10, 10, 401) if s_grid is None else s_grid
    rule = SpectralRule(params) if mode == 'finite_l0' else None
    # Rates do not depend on z, only the transverse phase is stepped
    rates = lambda omega: scattering_exponent(params, omega, mode, l0=l0, rule=rule)
    return _synthesize(source, params, L, s_grid, y_grid, rates,
                       workers=workers, steps=steps)


def homogeneous_front_on_axis(s, L, c0=1.0):
    """
    Closed form of the homogeneous front of the Gaussian source on the axis
    y = 0. With b = c0 L / 2,

        p(s, 0) = exp(-s^2/4) / (8 pi^2) [sqrt(pi) (1/2 - s^2/4 - b s/2 - b^2)
                  + pi b^3 erfcx(b - s/2)].
    """
    s = np.asarray(s, dtype=float)
    b = c0 * L / 2
    poly = np.sqrt(np.pi) * (0.5 - s ** 2 / 4 - b * s / 2 - b ** 2)
    return np.exp(-s ** 2 / 4) / (8 * np.pi ** 2) * (
        poly + np.pi * b ** 3 * special.erfcx(b - s / 2))


def homogeneous_front_reference(s, y, L, c0=1.0, epsabs=1e-13):
    """
    Homogeneous front of the Gaussian source at (s, y): the transverse
    integral is done in closed form and the frequency integral by adaptive
    quadrature.
    """
    r2 = float(y) ** 2

    def integrand(omega):
        if omega == 0:
            return 0.0
        a = omega ** 2 + 0.5j * omega * c0 * L
        inner = np.exp(-omega ** 2 * r2 / (4 * a)) / (2 * a)
        value = omega ** 4 * np.exp(-omega ** 2 - 1j * omega * s) * 4 * np.pi * inner
        return value.real

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        value, abserr = integrate.quad(integrand, 0, 12, epsabs=epsabs, limit=400)
    if abserr > 1e-9:
        raise QuadratureError(
            f"Reference front did not converge at s={s}, y={y}.", abserr=abserr)
    return 2 * value / (2 * (2 * np.pi) ** 3)


def kernel_time_profile(params, L, s_grid, mode='limit', l0=1.0, omega_max=16.0,
                        n_omega=8192):
    """
    Time-domain kernel on the axis kappa = 0,

        k(s) = (1 / 2 pi) int exp(-G(omega) L) exp(-i omega s) d omega,

    the law of the random arrival delay. Its heavy tail lies at s > 0.
    """
    if mode == 'homogeneous':
        raise ValueError("The homogeneous kernel has no time profile.")
    s_grid = np.asarray(s_grid, dtype=float)
    omega = np.linspace(0.0, omega_max, n_omega)
    d_omega = omega[1] - omega[0]
    # The limit coefficients are singular at omega = 0, where the factor is 1
    factor = np.ones(n_omega, dtype=complex)
    factor[1:] = np.exp(-scattering_exponent(params, omega[1:], mode, l0=l0) * L)
    weights = np.full(n_omega, d_omega)
    weights[[0, -1]] *= 0.5
    tail = float(np.abs(factor[-1]))
    if tail > 1e-10:
        warnings.warn(
            f"Kernel spectrum not decayed at omega_max={omega_max} ({tail:.2g}).",
            NumericalWarning
        )
    values = np.exp(-1j * np.multiply.outer(s_grid, omega)) @ (weights * factor)
    return values.real / np.pi


def spectral_centroid(source, n_k=256):
    """
    Frequency centroid of the source on the axis, weighting omega by
    omega^2 int Psi(omega, k) k dk.
    """
    omega = np.linspace(max(source.omega_cut, 1e-6), source.omega_max, source.n_omega)
    x, w = special.roots_legendre(n_k)
    weight = np.empty_like(omega)
    for i, om in enumerate(omega):
        q_up = source.upper_q(om)
        q = 0.5 * q_up * (x + 1)
        k = q / om
        # k dk = q dq / omega^2
        weight[i] = 0.5 * q_up * np.sum(w * q * source.psi_hat(om, k))
    return float(integrate.trapezoid(omega * weight, omega) / integrate.trapezoid(weight, omega))
