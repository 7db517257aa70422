"""
Deterministic quadrature of the medium correlation R(z), its tail constants
and the attenuation/dispersion coefficients Gamma_c, Gamma_s.

Every quantity is an integral over the spectral variable p of the spectral
measure r(p) = a(p) |p|^(-2 alpha) against a smooth function of the rate
g(p) = mu |p|^(2 beta). Scalar entry points use adaptive QUADPACK routines
with the p = 0 singularity handled by an algebraic weight. `SpectralRule`
provides a fixed high-order rule for vectorized evaluation.
"""
import logging, warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from layeredpulse.exceptions import DivergentCoefficientError, QuadratureError
from layeredpulse.processors import ProcessSchema

logger = logging.getLogger(__name__)

EPSABS = 1e-11
EPSREL = 1e-10


@dataclass(frozen=True)
class TailConstants:
    r0: float
    gamma: float
    regime: str

    @property
    def hurst(self):
        return 1 - self.gamma / 2 if self.gamma < 1 else 0.5


@dataclass(frozen=True)
class ScatteringCoefficients:
    """
    Attenuation and dispersion coefficients at angular frequency `omega`.
    """
    omega: float
    gamma_c: float
    gamma_s: float

    @property
    def value(self):
        return complex(self.gamma_c, self.gamma_s)

    @property
    def divergent(self):
        return bool(np.isinf(self.gamma_c))


@lru_cache(maxsize=None)
def _regime_schema():
    return ProcessSchema('regimes.json')


def regime(gamma):
    """
    Regime labels of the decay exponent, looked up in `schemas/regimes.json`.

    Returns
    -------
    dict
        Keys `regime`, `sigma_law`.
    """
    gamma = round(float(gamma), 12)
    return _regime_schema().analyze(gamma=gamma)


def _support(params):
    """
    Upper end of the positive spectral support.
    """
    if params.density.kind == 'indicator':
        return min(params.r_s, params.density.half_width)
    return params.r_s


def _quad(f, a, b, **kwargs):
    """
    Run `scipy.integrate.quad`, raising `QuadratureError` when QUADPACK
    reports failure with an error estimate well above the tolerance.
    """
    kwargs.setdefault('epsabs', EPSABS)
    kwargs.setdefault('epsrel', EPSREL)
    kwargs.setdefault('limit', 200)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        res = integrate.quad(f, a, b, full_output=1, **kwargs)
    value, abserr = res[0], res[1]
    if len(res) > 3:
        bound = 1e3 * max(kwargs['epsabs'], kwargs['epsrel'] * abs(value))
        if abserr > bound:
            raise QuadratureError(
                f"Quadrature on [{a}, {b}] did not converge: {res[3]} "
                f"(achieved {abserr:.3g})", abserr=abserr
            )
        logger.debug("Quadrature warning on [%g, %g]: %s", a, b, res[3])
    return value, abserr


def _power_integral(f, expo, upper, scale, two_beta, **kwargs):
    """
    Integral of f(p) p**expo over (0, upper) for smooth f and expo > -1.

    The panel (0, min(scale, upper)) is mapped to u = p**two_beta, where the
    integrand is smooth against the algebraic weight u**((expo + 1) /
    two_beta - 1). The rest is split into decades.
    """
    b0 = min(scale, upper)
    weight_expo = (expo + 1) / two_beta - 1
    total, err = _quad(
        lambda u: f(u ** (1 / two_beta)) / two_beta,
        0.0, b0 ** two_beta, weight='alg', wvar=(weight_expo, 0), **kwargs
    )
    lo = b0
    while lo < upper:
        hi = min(upper, 10 * lo)
        val, e = _quad(lambda p: f(p) * p ** expo, lo, hi, **kwargs)
        total += val
        err += e
        lo = hi
    return total, err


def _rate_scale(params, rate):
    """
    Spectral position where g(p) equals `rate`.
    """
    if rate <= 0:
        return np.inf
    return (rate / params.mu) ** (1 / (2 * params.beta))


def autocorrelation(params, z):
    """
    Correlation function R(z) = int_S exp(-g(p)|z|) a(p)|p|^(-2 alpha) dp.

    Parameters
    ----------
    params : MediumParams
    z : float

    Returns
    -------
    float
    """
    z = abs(float(z))
    upper = _support(params)
    scale = _rate_scale(params, 1 / z) if z > 0 else upper
    value, _ = _power_integral(
        lambda p: params.density(p) * np.exp(-params.mu * p ** (2 * params.beta) * z),
        -2 * params.alpha, upper, max(scale, 1e-300), 2 * params.beta
    )
    return 2 * value


def tail_constants(params):
    """
    Tail amplitude R0 and exponent gamma of R(z) ~ R0 |z|^(-gamma).

    R0 = a(0) int_R exp(-mu |p|^(2 beta)) |p|^(-2 alpha) dp is computed by
    quadrature.
    """
    gamma = params.gamma
    upper = _rate_scale(params, 800.0)
    value, _ = _power_integral(
        lambda p: np.exp(-params.mu * p ** (2 * params.beta)),
        -2 * params.alpha, upper, upper, 2 * params.beta
    )
    return TailConstants(
        r0=2 * params.a0 * value, gamma=gamma, regime=regime(gamma)['regime']
    )


def _coefficient_integrals(params, omega_eff, upper=None, density=None):
    """
    Real and imaginary parts of 2 int_S r(p) / (g(p) - 2i omega_eff / c0) dp.
    """
    density = density or params.density
    upper = _support(params) if upper is None else upper
    big = 2 * abs(omega_eff) / params.c0
    two_beta = 2 * params.beta
    mu = params.mu
    scale = _rate_scale(params, big) if big > 0 else upper

    def real_part(p):
        g = mu * p ** two_beta
        return density(p) * g / (g ** 2 + big ** 2)

    def imag_part(p):
        g = mu * p ** two_beta
        return density(p) * big / (g ** 2 + big ** 2)

    gc, _ = _power_integral(real_part, -2 * params.alpha, upper, scale, two_beta)
    gs, _ = _power_integral(imag_part, -2 * params.alpha, upper, scale, two_beta)
    return 4 * gc, 4 * np.sign(omega_eff) * gs


def scattering_coefficients(params, omega):
    """
    Coefficients Gamma_c(omega) + i Gamma_s(omega) = 2 int_0^inf R(s)
    exp(2 i omega s / c0) ds, evaluated in the closed p-space form
    2 int_S r(p) / (g(p) - 2 i omega / c0) dp.

    At omega = 0 with gamma <= 1 the returned `gamma_c` is infinite and the
    `divergent` flag is set.
    """
    omega = float(omega)
    if omega == 0:
        if params.gamma <= 1:
            logger.debug("Gamma_c(0) diverges for gamma=%g", params.gamma)
            return ScatteringCoefficients(0.0, np.inf, 0.0)
        upper = _support(params)
        val, _ = _power_integral(
            lambda p: params.density(p) / params.mu,
            -2 * (params.alpha + params.beta), upper, upper, 2 * params.beta
        )
        return ScatteringCoefficients(0.0, 4 * val, 0.0)
    gc, gs = _coefficient_integrals(params, omega)
    return ScatteringCoefficients(omega, gc, gs)


def scaling_sigma(gamma, l0):
    """
    Amplitude normalization sigma(l0) of the rescaled correlation R(s/l0).
    """
    if l0 <= 0:
        raise ValueError(f"Correlation length `l0` must be positive, got {l0}.")
    law = regime(gamma)['sigma_law']
    if law == 'power':
        return l0 ** -gamma
    elif law == 'log':
        if l0 >= 1:
            raise ValueError(
                f"Logarithmic normalization requires `l0` below 1, got {l0}.")
        return 1 / (l0 * abs(np.log(l0)))
    return 1 / l0


def scaled_coefficients(params, omega, l0):
    """
    Coefficients of the rescaled correlation sigma(l0) R(s / l0),

        2 sigma(l0) int_0^inf R(s / l0) exp(2 i omega s / c0) ds
        = 2 sigma(l0) l0^gamma int a(l0^(1/2beta) q) |q|^(-2 alpha)
          / (mu |q|^(2 beta) - 2 i omega / c0) dq,

    the integral running over |q| < r_s l0^(-1/2beta).
    """
    if l0 <= 0:
        raise ValueError(f"Correlation length `l0` must be positive, got {l0}.")
    omega = float(omega)
    if omega == 0 and params.gamma <= 1:
        return ScatteringCoefficients(0.0, np.inf, 0.0)
    stretch = l0 ** (1 / (2 * params.beta))
    density = lambda q: params.density(stretch * q)
    upper = _support(params) / stretch
    if omega == 0:
        val, _ = _power_integral(
            lambda q: density(q) / params.mu,
            -2 * (params.alpha + params.beta), upper, upper, 2 * params.beta
        )
        gc, gs = 4 * val, 0.0
    else:
        gc, gs = _coefficient_integrals(params, omega, upper=upper, density=density)
    factor = scaling_sigma(params.gamma, l0) * l0 ** params.gamma
    return ScatteringCoefficients(omega, factor * gc, factor * gs)


def fractional_coefficients(gamma, omega, c0=1.0):
    """
    Normalized power-law coefficients for gamma in (0, 1),

        Gamma_c0 = 2 Gamma(1 - gamma) cos((1 - gamma) pi / 2) (2|omega|/c0)^(gamma - 1)
        Gamma_s0 = sign(omega) 2 Gamma(1 - gamma) sin((1 - gamma) pi / 2) (2|omega|/c0)^(gamma - 1)
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0):
        raise DivergentCoefficientError(
            "Power-law coefficients diverge at omega = 0."
        )
    amp = 2 * special.gamma(1 - gamma) * (2 * np.abs(omega) / c0) ** (gamma - 1)
    phase = (1 - gamma) * np.pi / 2
    return amp * np.cos(phase), np.sign(omega) * amp * np.sin(phase)


def limit_coefficients(params, omega):
    """
    Limit of the rescaled coefficients as l0 -> 0.

    gamma in (0, 1) gives (R0 Gamma_c0(omega), R0 Gamma_s0(omega)); gamma = 1
    gives (2 a(0) / (mu beta), 0); gamma > 1 gives (Gamma_c(0), 0).
    """
    gamma = params.gamma
    law = regime(gamma)['regime']
    if law == 'long_range':
        if omega == 0:
            raise DivergentCoefficientError(
                f"Limit coefficients diverge at omega = 0 for gamma={gamma}."
            )
        r0 = tail_constants(params).r0
        gc0, gs0 = fractional_coefficients(gamma, omega, params.c0)
        return ScatteringCoefficients(float(omega), r0 * float(gc0), r0 * float(gs0))
    elif law == 'critical':
        return ScatteringCoefficients(
            float(omega), 2 * params.a0 / (params.mu * params.beta), 0.0)
    return ScatteringCoefficients(
        float(omega), scattering_coefficients(params, 0.0).gamma_c, 0.0)


def limit_gamma(params, omega):
    """
    Vectorized complex limit coefficient Gamma_c + i Gamma_s on an array of
    nonzero frequencies.
    """
    omega = np.asarray(omega, dtype=float)
    law = regime(params.gamma)['regime']
    if law == 'long_range':
        r0 = tail_constants(params).r0
        gc0, gs0 = fractional_coefficients(params.gamma, omega, params.c0)
        return r0 * (gc0 + 1j * gs0)
    gamma0 = limit_coefficients(params, 1.0).gamma_c
    return np.full(omega.shape, gamma0, dtype=complex)


def hermite_constant(params, eps, theta=None, n_nodes=80):
    """
    Hermite-rank-one constant Theta_1 = (E[Theta(sigma U) U])^2 with U a
    standard Gaussian and sigma = sqrt(eps), by Gauss-Hermite quadrature.

    Parameters
    ----------
    params : MediumParams
    eps : float
    theta : callable, optional
        Nonlinearity to use instead of `params.theta`.
    n_nodes : int, default 80
    """
    if eps <= 0:
        raise ValueError(f"Scaling `eps` must be positive, got {eps}.")
    theta = params.theta if theta is None else theta
    x, w = special.roots_hermitenorm(n_nodes)
    moment = np.sum(w * theta(np.sqrt(eps) * x) * x) / np.sqrt(2 * np.pi)
    return float(moment ** 2)


def rank_one_factor(params, eps):
    """
    Squared first Hermite coefficient of nu = Theta(sqrt(eps) V) relative
    to V, Theta_1(sigma) / R(0) with sigma^2 = eps R(0). Tends to
    eps theta'_0^2 as eps -> 0.
    """
    var = float(autocorrelation(params, 0.0))
    return hermite_constant(params, eps * var) / var


def nu_correlation_tail(params, eps):
    """
    Predicted amplitude of the nu-field correlation tail, E[nu(0) nu(z)] ~
    R0 Theta_1 |z|^(-gamma), with Theta_1 taken relative to the variance
    R(0) of V.
    """
    return tail_constants(params).r0 * rank_one_factor(params, eps)


def travel_time_scale(gamma, eps):
    """
    Fluctuation scale sigma_eps of the random travel time.
    """
    law = regime(gamma)['sigma_law']
    if law == 'power':
        return eps ** ((1 + gamma) / 2)
    elif law == 'log':
        return eps * np.sqrt(abs(np.log(np.sqrt(eps))))
    return eps


def delay_constant(params, L):
    """
    Limit of the arrival delay divided by eps, theta'_0^2 R(0) L / (8 c0).
    """
    return params.theta_prime0 ** 2 * autocorrelation(params, 0.0) * L / (8 * params.c0)


class SpectralRule(object):
    """
    Fixed quadrature rule for integrals of r(p) F(g(p)) over S.

    The positive half-line is covered by Gauss-Legendre panels on geometric
    edges r_s 2^-k, and the innermost panel carries the |p|^(-2 alpha)
    weight exactly through Gauss-Jacobi nodes. Symmetry of a(p) is used to
    fold the negative half-line.

    Parameters
    ----------
    params : MediumParams
    n_nodes : int, default 16
        Nodes per panel.
    p_min_ratio : float, default 1e-14
        Inner edge of the geometric panels relative to the support.
    """

    def __init__(self, params, n_nodes=16, p_min_ratio=1e-14):
        self.params = params
        upper = _support(params)
        n_panels = int(np.ceil(np.log2(1 / p_min_ratio)))
        edges = upper * 0.5 ** np.arange(n_panels + 1)
        x, w = special.roots_legendre(n_nodes)
        lo, hi = edges[1:, None], edges[:-1, None]
        p = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * w * params.spectrum(p)
        # Inner panel (0, p_min) with the power law in the Jacobi weight
        p_min = edges[-1]
        xj, wj = special.roots_jacobi(n_nodes, 0.0, -2 * params.alpha)
        pj = 0.5 * p_min * (1 + xj)
        wj = (0.5 * p_min) ** (1 - 2 * params.alpha) * wj * params.density(pj)
        self.p = np.concatenate([p.ravel(), pj])
        # Both half-lines folded into the weights
        self.weights = 2 * np.concatenate([weights.ravel(), wj])
        self.rates = params.rate(self.p)

    def integrate(self, values):
        return values @ self.weights

    def autocorrelation(self, z):
        z = np.abs(np.asarray(z, dtype=float))
        return np.exp(-np.multiply.outer(z, self.rates)) @ self.weights

    def derivative_at_zero(self, order=1):
        """
        Derivative of R at z = 0+, (-1)^order int r g^order dp.
        """
        return (-1) ** order * float(self.rates ** order @ self.weights)

    def coefficients(self, omega, l0=1.0):
        """
        Vectorized Gamma_c + i Gamma_s of the correlation sigma(l0) R(s/l0).
        """
        omega = np.asarray(omega, dtype=float)
        sigma = scaling_sigma(self.params.gamma, l0) if l0 != 1.0 else 1.0
        big = np.ravel(2 * omega * l0 / self.params.c0)
        values = np.empty(big.shape, dtype=complex)
        for i in range(0, len(big), 2048):
            denom = self.rates[None, :] - 1j * big[i:i + 2048, None]
            values[i:i + 2048] = (self.weights / denom).sum(axis=1)
        return (2 * sigma * l0 * values).reshape(omega.shape)

    def kernel_moments(self, h, n_cells, kappa=1.0, sigma=1.0):
        """
        Exact cell moments of the kernel k(u) = sigma R(kappa u) on cells
        [m h, (m + 1) h], m = 0..n_cells-1.

        Returns
        -------
        m0, m1 : numpy.ndarray
            int_0^h k(m h + t) dt and int_0^h t k(m h + t) dt.
        """
        lam = kappa * self.rates
        lh = lam * h
        small = lh < 1e-6
        safe = np.where(small, 1.0, lam)
        # Cell integrals of exp(-lam t) and t exp(-lam t) over (0, h)
        e0 = np.where(small, h * (1 - lh / 2), -np.expm1(-lh) / safe)
        e1 = np.where(
            small, h ** 2 * (0.5 - lh / 3),
            (-np.expm1(-lh) - lh * np.exp(-lh)) / safe ** 2
        )
        m0 = np.empty(n_cells)
        m1 = np.empty(n_cells)
        start = h * np.arange(n_cells)
        block = max(1, int(2 ** 22 // max(len(lam), 1)))
        for i in range(0, n_cells, block):
            decay = np.exp(-np.multiply.outer(start[i:i + block], lam))
            m0[i:i + block] = decay @ (self.weights * e0)
            m1[i:i + block] = decay @ (self.weights * e1)
        return sigma * m0, sigma * m1


def time_domain_coefficients(params, omega, rule=None, epsabs=1e-10):
    """
    Oscillatory-quadrature route to Gamma_c and Gamma_s: 2 int_0^inf R(s)
    cos(2 omega s / c0) ds and the matching sine integral, using the QUADPACK
    Fourier-integral routine on the semi-infinite range. R is evaluated with
    a `SpectralRule`.
    """
    if omega == 0:
        raise DivergentCoefficientError("Fourier-integral route needs omega != 0.")
    rule = SpectralRule(params) if rule is None else rule
    big = 2 * abs(omega) / params.c0
    f = lambda s: float(rule.autocorrelation(s))
    opts = dict(weight='cos', wvar=big, epsabs=epsabs, limlst=200, limit=400)
    gc, _ = _quad(f, 0, np.inf, **opts)
    opts['weight'] = 'sin'
    gs, _ = _quad(f, 0, np.inf, **opts)
    return ScatteringCoefficients(float(omega), 2 * gc, 2 * np.sign(omega) * gs)
