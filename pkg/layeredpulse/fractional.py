"""
Time-domain memory operators and their frequency-domain checks.

Both the finite-l0 memory operator and the fractional limit operator are
causal convolutions of a derivative of the signal against a kernel. They are
discretized by product integration: the kernel is integrated exactly on every
cell against the piecewise-linear interpolant of the data.
"""
import logging, warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import signal, special

from layeredpulse.correlation import (
    SpectralRule, limit_coefficients, limit_gamma, regime, scaling_sigma,
    tail_constants)
from layeredpulse.exceptions import NumericalWarning

logger = logging.getLogger(__name__)

# Fourth-order central stencils, offsets -3..3
_STENCILS = {
    1: (np.array([0, 1, -8, 0, 8, -1, 0]) / 12, 1),
    2: (np.array([0, -1, 16, -30, 16, -1, 0]) / 12, 2),
    3: (np.array([1, -8, 13, 0, -13, 8, -1]) / 8, 3),
}


@dataclass
class SampledSignal:
    """
    Samples of a signal on a uniform time grid.

    Parameters
    ----------
    s_grid : numpy.ndarray
        Uniform grid of time offsets.
    values : numpy.ndarray
        Real or complex samples.
    decay_flag : bool, default True
        Whether the signal and its derivatives have decayed at the left end
        of the grid.
    """
    s_grid: np.ndarray
    values: np.ndarray
    decay_flag: bool = True

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.s_grid.ndim != 1 or len(self.s_grid) < 8:
            raise ValueError("Signal grid must be one-dimensional with at least 8 points.")
        if self.values.shape != self.s_grid.shape:
            raise ValueError(
                f"Signal values of shape {self.values.shape} do not match the "
                f"grid of shape {self.s_grid.shape}."
            )
        steps = np.diff(self.s_grid)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("Signal grid must be uniformly spaced.")
        if steps[0] <= 0:
            raise ValueError("Signal grid must be increasing.")

    @property
    def ds(self):
        return float(self.s_grid[1] - self.s_grid[0])

    @classmethod
    def from_function(cls, func, s_grid, decay_flag=True):
        s_grid = np.asarray(s_grid, dtype=float)
        return cls(s_grid, func(s_grid), decay_flag=decay_flag)

    def replace(self, values):
        return SampledSignal(self.s_grid, values, decay_flag=self.decay_flag)

    def to_frame(self, output=None):
        frame = pd.DataFrame({'s': self.s_grid, 'input': self.values})
        if output is not None:
            frame['output'] = output.values
        return frame


def derivative(values, h, order):
    """
    Derivative of uniformly sampled data by fourth-order central
    differences. The three points at each end fall back to second-order
    one-sided differences.
    """
    values = np.asarray(values)
    values = values.astype(np.result_type(values.dtype, float), copy=False)
    if order == 0:
        return values.copy()
    if order > 3:
        return derivative(derivative(values, h, 3), h, order - 3)
    coeffs, power = _STENCILS[order]
    out = np.empty_like(values)
    # Stencil applied as correlation over offsets -3..3
    out[3:-3] = np.convolve(values, coeffs[::-1], mode='valid')
    edge = values
    for _ in range(order):
        edge = np.gradient(edge, edge_order=2)
    out[:3], out[-3:] = edge[:3], edge[-3:]
    return out / h ** power


def causal_convolution_weights(m0, m1, h):
    """
    Product-integration weights of a causal kernel from its cell moments.

    With m0[m] = int k and m1[m] = int t k over the cell [m h, (m + 1) h] in
    the lag t, the integral of k against linearly interpolated data is
    sum_j c[j] g[n - j] with c[0] = a[0] and c[j] = a[j] + b[j - 1], where
    a = m0 - m1 / h and b = m1 / h.
    """
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    a = m0 - m1 / h
    b = m1 / h
    c = a.copy()
    c[1:] += b[:-1]
    return c


def causal_convolve(weights, values):
    """
    out[n] = sum_{j <= n} weights[j] values[n - j].
    """
    return signal.fftconvolve(values, weights)[:len(values)]


def weyl_weights(gamma_frac, h, n):
    """
    Product-integration weights of the kernel u^(-gamma) / Gamma(1 - gamma)
    on n cells of width h.
    """
    m = np.arange(n, dtype=float)
    p0, p1 = 1 - gamma_frac, 2 - gamma_frac
    # (m+1)^p - m^p without cancellation for large m
    with np.errstate(divide='ignore', invalid='ignore'):
        grow0 = np.where(m > 0, m ** p0 * np.expm1(p0 * np.log1p(1 / np.maximum(m, 1))), 1.0)
        grow1 = np.where(m > 0, m ** p1 * np.expm1(p1 * np.log1p(1 / np.maximum(m, 1))), 1.0)
    k0 = h ** p0 * grow0 / p0
    k1 = h ** p1 * grow1 / p1 - m * h * k0
    return causal_convolution_weights(k0, k1, h) / special.gamma(1 - gamma_frac)


def weyl_derivative(f, gamma_frac, j=0):
    """
    Weyl derivative D^(j + gamma) f(s) = 1/Gamma(1 - gamma) int_{-inf}^s
    f^(j+1)(tau) (s - tau)^(-gamma) d tau, truncated to the grid.

    Parameters
    ----------
    f : SampledSignal
    gamma_frac : float
        Fractional order in (0, 1).
    j : int, default 0
        Integer order applied before the fractional part.

    Returns
    -------
    SampledSignal
    """
    if not 0 < gamma_frac < 1:
        raise ValueError(
            f"Fractional order `gamma_frac` must lie in (0, 1), got {gamma_frac}."
        )
    if j < 0 or int(j) != j:
        raise ValueError(f"Integer order `j` must be a nonnegative integer, got {j}.")
    h = f.ds
    base = derivative(f.values, h, j)
    scale = np.max(np.abs(base))
    if scale > 0 and f.decay_flag:
        tail = float(np.abs(base[0]) / scale)
        if tail > 1e-6:
            warnings.warn(
                f"Weyl derivative truncates a left tail of relative size {tail:.2g}.",
                NumericalWarning
            )
    g = derivative(f.values, h, j + 1)
    out = causal_convolve(weyl_weights(gamma_frac, h, len(g)), g)
    return f.replace(out)


def memory_kernel_weights(params, h, n, l0=None, rule=None):
    """
    Product-integration weights of the memory kernel R(c0 u / 2), or of
    sigma(l0) R(c0 u / (2 l0)) when `l0` is given.
    """
    rule = SpectralRule(params) if rule is None else rule
    if l0 is None:
        kappa, sigma = params.c0 / 2, 1.0
    else:
        kappa = params.c0 / (2 * l0)
        sigma = scaling_sigma(params.gamma, l0)
    m0, m1 = rule.kernel_moments(h, n, kappa=kappa, sigma=sigma)
    return causal_convolution_weights(m0, m1, h)


def apply_memory_operator(psi, params, l0=None, rule=None):
    """
    Memory operator I(psi)(s) = theta'_0^2 / (8 c0^2) int_{-inf}^s
    R(c0 (s - tau) / 2) psi'''(tau) d tau.

    Parameters
    ----------
    psi : SampledSignal
    params : MediumParams
    l0 : float, optional
        Use the rescaled correlation sigma(l0) R(s / l0) instead of R.
    rule : SpectralRule, optional

    Returns
    -------
    SampledSignal
    """
    h = psi.ds
    third = derivative(psi.values, h, 3)
    weights = memory_kernel_weights(params, h, len(third), l0=l0, rule=rule)
    factor = params.theta_prime0 ** 2 / (8 * params.c0 ** 2)
    return psi.replace(factor * causal_convolve(weights, third))


def limit_constant(params):
    """
    Prefactor of the limit operator. For gamma in (0, 1) it multiplies
    D^(2 + gamma) and equals theta'_0^2 R0 Gamma(1 - gamma) / (2^(3 - gamma)
    c0^(2 + gamma)); otherwise it multiplies the third derivative and equals
    theta'_0^2 Gamma_0 / (8 c0^3).
    """
    gamma = params.gamma
    theta2 = params.theta_prime0 ** 2
    if regime(gamma)['regime'] == 'long_range':
        r0 = tail_constants(params).r0
        return theta2 * r0 * special.gamma(1 - gamma) / (
            2 ** (3 - gamma) * params.c0 ** (2 + gamma))
    gamma0 = limit_coefficients(params, 1.0).gamma_c
    return theta2 * gamma0 / (8 * params.c0 ** 3)


def apply_limit_operator(psi, params):
    """
    Limit operator I_0(psi): a multiple of the Weyl derivative D^(2 + gamma)
    psi for gamma in (0, 1), and of psi''' otherwise.
    """
    constant = limit_constant(params)
    if regime(params.gamma)['regime'] == 'long_range':
        return psi.replace(constant * weyl_derivative(psi, params.gamma, j=2).values)
    return psi.replace(constant * derivative(psi.values, psi.ds, 3))


def memory_symbol(params, omega, l0=1.0, rule=None):
    """
    Frequency multiplier of the memory operator in the convention
    F(omega) = int f(s) exp(i omega s) ds:
    theta'_0^2 / (8 c0^3) i omega^3 (Gamma_c + i Gamma_s).
    """
    rule = SpectralRule(params) if rule is None else rule
    omega = np.asarray(omega, dtype=float)
    gamma = rule.coefficients(omega, l0=l0)
    return params.theta_prime0 ** 2 / (8 * params.c0 ** 3) * 1j * omega ** 3 * gamma


def limit_symbol(params, omega):
    omega = np.asarray(omega, dtype=float)
    gamma = limit_gamma(params, omega)
    return params.theta_prime0 ** 2 / (8 * params.c0 ** 3) * 1j * omega ** 3 * gamma


def fourier_transform(sig, omega):
    """
    Trapezoid evaluation of int f(s) exp(i omega s) ds on the signal grid.
    """
    omega = np.asarray(omega, dtype=float)
    weights = np.full(len(sig.s_grid), sig.ds)
    weights[[0, -1]] *= 0.5
    return np.exp(1j * np.multiply.outer(omega, sig.s_grid)) @ (weights * sig.values)


def hilbert_transform(values, d_omega, pad=8, taper=0.0, tail_coefficient=None):
    """
    Hilbert transform (1/pi) p.v. int f(w) / (omega - w) dw of samples on the
    symmetric grid omega_k = d_omega * (k - M), k = 0..2M.

    Parameters
    ----------
    values : array_like
        Samples on the symmetric grid.
    d_omega : float
    pad : int, default 8
        Zero-padding factor of the FFT.
    taper : float, default 0.0
        Fraction of each end tapered by a raised cosine before transforming.
    tail_coefficient : float, optional
        Coefficient c of an odd c / omega tail beyond the grid, whose
        transform (c / (pi omega)) ln((W - omega) / (W + omega)) is added.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n % 2 == 0:
        raise ValueError("Hilbert grid must be symmetric with an odd number of points.")
    if taper > 0:
        width = max(1, int(taper * n / 2))
        ramp = 0.5 * (1 - np.cos(np.pi * np.arange(width) / width))
        window = np.ones(n)
        window[:width], window[-width:] = ramp, ramp[::-1]
        values = values * window
    size = int(pad) * n
    spectrum = np.fft.fft(values, size)
    freq = np.fft.fftfreq(size)
    out = np.fft.ifft(-1j * np.sign(freq) * spectrum)[:n].real
    if tail_coefficient is not None:
        half = (n - 1) // 2
        omega = d_omega * (np.arange(n) - half)
        edge = d_omega * half
        with np.errstate(divide='ignore', invalid='ignore'):
            correction = tail_coefficient / (np.pi * omega) * np.log(
                (edge - omega) / (edge + omega))
        correction[half] = -2 * tail_coefficient / (np.pi * edge)
        out = out + np.nan_to_num(correction)
    return out


def lorentzian_pair(omega):
    """
    Exact Hilbert pair 1/(1 + omega^2) and omega/(1 + omega^2).
    """
    omega = np.asarray(omega, dtype=float)
    return 1 / (1 + omega ** 2), omega / (1 + omega ** 2)


@dataclass
class KramersKronigResult:
    table: pd.DataFrame
    residual_c: float
    residual_s: float

    @property
    def residuals(self):
        return self.residual_c, self.residual_s


def kk_pair_residual(omega, even_part, odd_part, band, pad=8, taper=0.0):
    """
    Check H[even] = odd and H[odd] = -even on a band for a pair sampled on
    omega = 0, d, ..., W.

    Returns
    -------
    KramersKronigResult
    """
    omega = np.asarray(omega, dtype=float)
    d_omega = omega[1] - omega[0]
    even_full = np.concatenate([even_part[:0:-1], even_part])
    odd_full = np.concatenate([-odd_part[:0:-1], odd_part])
    tail = odd_part[-1] * omega[-1]
    h_even = hilbert_transform(even_full, d_omega, pad=pad, taper=taper)
    h_odd = hilbert_transform(odd_full, d_omega, pad=pad, taper=taper,
                              tail_coefficient=tail)
    half = len(omega) - 1
    h_even, h_odd = h_even[half:], h_odd[half:]
    # Uncorrected tail of the even part bounds the truncation error
    bound = abs(even_part[-1]) * omega[-1] / (np.pi * (omega[-1] - band[1]))
    mask = (omega >= band[0]) & (omega <= band[1])
    norm_c = np.linalg.norm(odd_part[mask])
    norm_s = np.linalg.norm(even_part[mask])
    if bound > 1e-3 * np.max(np.abs(odd_part[mask])):
        warnings.warn(
            f"Hilbert band truncation bound {bound:.2g} is not negligible.",
            NumericalWarning
        )
    residual_c = float(np.linalg.norm(h_even[mask] - odd_part[mask]) / norm_c)
    residual_s = float(np.linalg.norm(h_odd[mask] + even_part[mask]) / norm_s)
    table = pd.concat([
        pd.DataFrame({
            'relation': 'cos', 'omega': omega[mask], 'lhs': h_even[mask],
            'rhs': odd_part[mask], 'residual': h_even[mask] - odd_part[mask]}),
        pd.DataFrame({
            'relation': 'sin', 'omega': omega[mask], 'lhs': h_odd[mask],
            'rhs': -even_part[mask], 'residual': h_odd[mask] + even_part[mask]}),
    ], ignore_index=True)
    return KramersKronigResult(table, residual_c, residual_s)


def kk_residual(params, omega_band=(0.25, 8.0), n_points=16385, omega_max=256.0,
                pad=8, taper=0.0, rule=None):
    """
    Kramers-Kronig residuals of the scattering coefficients.

    The pair omega^2 Gamma_c + (c0^2 / 2) R'(0) and omega^2 Gamma_s -
    c0 R(0) omega, the real and imaginary parts of the transform of
    -(c0^2 / 2) R'' over the half-line, decays at infinity and is checked
    on `omega_band`.

    Returns
    -------
    KramersKronigResult
    """
    if not 0 <= omega_band[0] < omega_band[1] < omega_max:
        raise ValueError(
            f"Band {omega_band} must lie inside [0, omega_max={omega_max})."
        )
    rule = SpectralRule(params) if rule is None else rule
    omega = np.linspace(0.0, omega_max, n_points)
    gamma = rule.coefficients(omega)
    c0 = params.c0
    even_part = omega ** 2 * gamma.real + 0.5 * c0 ** 2 * rule.derivative_at_zero(1)
    odd_part = omega ** 2 * gamma.imag - c0 * float(rule.autocorrelation(0.0)) * omega
    result = kk_pair_residual(omega, even_part, odd_part, omega_band, pad=pad, taper=taper)
    logger.info(
        "Kramers-Kronig residuals on %s: %.3g, %.3g",
        omega_band, result.residual_c, result.residual_s
    )
    return result
