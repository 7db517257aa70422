"""
Limiting diffusion of the compensated mode amplitudes and its closed-form
transmission moment.

In the limit the pair X = (A, B) solves the Stratonovich system

    dX = -s [[0, 1], [1, 0]] X o dW1 - i s [[0, 1], [-1, 0]] X o dW2
         - i d [[1, 0], [0, -1]] X dz,

with s^2 = theta'_0^2 omega^2 Gamma_c / (8 c0^2) and d = theta'_0^2 omega^2
Gamma_s / (8 c0^2). Every generator lies in su(1, 1), so |A|^2 - |B|^2 = 1
holds pathwise and E[1 / conj(A(L))] = exp(-(s^2 + i d) L).
"""
import logging
from dataclasses import dataclass

import numpy as np

from layeredpulse.correlation import scattering_coefficients
from layeredpulse.exceptions import ConservationError, DivergentCoefficientError
from layeredpulse.medium import SDE_STREAM, spawn_streams

logger = logging.getLogger(__name__)

SCHEMES = ('midpoint', 'heun')


def _score(diff, err):
    if err == 0:
        return 0.0 if diff == 0 else float(np.copysign(np.inf, diff))
    return float(diff / err)


@dataclass
class MomentEstimate:
    """
    Monte Carlo estimate of a complex moment with CLT standard errors.
    """
    mean: complex
    stderr_re: float
    stderr_im: float
    n: int

    @classmethod
    def from_samples(cls, samples):
        samples = np.asarray(samples, dtype=complex)
        n = len(samples)
        if n < 2:
            raise ValueError(f"At least 2 samples are required, got {n}.")
        return cls(
            mean=complex(np.mean(samples)),
            stderr_re=float(np.std(samples.real, ddof=1) / np.sqrt(n)),
            stderr_im=float(np.std(samples.imag, ddof=1) / np.sqrt(n)),
            n=n,
        )

    @property
    def stderr(self):
        return float(np.hypot(self.stderr_re, self.stderr_im))

    def z_scores(self, target):
        target = complex(target)
        return (_score(self.mean.real - target.real, self.stderr_re),
                _score(self.mean.imag - target.imag, self.stderr_im))

    def z_against(self, other):
        """
        Two-sample z-scores (re, im) of the difference with an independent
        estimate `other`.
        """
        diff = self.mean - other.mean
        return (_score(diff.real, float(np.hypot(self.stderr_re, other.stderr_re))),
                _score(diff.imag, float(np.hypot(self.stderr_im, other.stderr_im))))

    def to_dict(self, target=None):
        doc = {
            'mean_re': self.mean.real, 'mean_im': self.mean.imag,
            'stderr_re': self.stderr_re, 'stderr_im': self.stderr_im,
            'stderr': self.stderr, 'n': self.n,
        }
        if target is not None:
            z_re, z_im = self.z_scores(target)
            doc.update({
                'closed_form_re': complex(target).real,
                'closed_form_im': complex(target).imag,
                'z_re': z_re, 'z_im': z_im,
                'z_score': max(abs(z_re), abs(z_im)),
            })
        return doc


@dataclass
class LimitState:
    """
    Pair (A, B) of the limit diffusion at position `z`.
    """
    z: float
    x: np.ndarray

    @property
    def defect(self):
        return np.abs(self.x[..., 0]) ** 2 - np.abs(self.x[..., 1]) ** 2 - 1


@dataclass
class LimitPath:
    """
    Recorded paths, `x` of shape (n_paths, len(z), 2).
    """
    z: np.ndarray
    x: np.ndarray

    def state(self, i):
        return LimitState(float(self.z[i]), self.x[:, i])

    @property
    def final(self):
        return self.state(-1)

    @property
    def max_defect(self):
        d = np.abs(self.x[..., 0]) ** 2 - np.abs(self.x[..., 1]) ** 2 - 1
        return float(np.max(np.abs(d)))


def _resolve_coefficients(params, omega, coefficients):
    if coefficients is None:
        coefficients = scattering_coefficients(params, omega)
    gc, gs = coefficients.gamma_c, coefficients.gamma_s
    if not np.isfinite(gc):
        raise DivergentCoefficientError(
            f"Gamma_c({omega}) is not finite for gamma={params.gamma}."
        )
    return gc, gs


def sde_rates(params, omega, coefficients=None):
    """
    Noise variance rate s^2 and drift rate d of the limit diffusion.
    """
    gc, gs = _resolve_coefficients(params, omega, coefficients)
    factor = params.theta_prime0 ** 2 * omega ** 2 / (8 * params.c0 ** 2)
    return factor * gc, factor * gs


def _generators(s, d, h, dw):
    """
    su(1, 1) increments [[i a, b], [conj(b), -i a]] over one step, returned
    as (a, b) arrays over paths.
    """
    a = -d * h * np.ones(len(dw))
    b = -s * dw[:, 0] - 1j * s * dw[:, 1]
    return a, b


def _midpoint_step(x, a, b):
    # Cayley map (I - M/2)^-1 (I + M/2) of M = [[i a, b], [conj(b), -i a]]
    bc = np.conj(b)
    det = 1 + a ** 2 / 4 - np.abs(b) ** 2 / 4
    p11, p12 = 1 + 0.5j * a, 0.5 * b
    p21, p22 = 0.5 * bc, 1 - 0.5j * a
    y0 = p11 * x[:, 0] + p12 * x[:, 1]
    y1 = p21 * x[:, 0] + p22 * x[:, 1]
    # Inverse of I - M/2 through its adjugate
    return np.stack([
        ((1 + 0.5j * a) * y0 + 0.5 * b * y1) / det,
        (0.5 * bc * y0 + (1 - 0.5j * a) * y1) / det,
    ], axis=1)


def _as_real(x):
    return np.concatenate([x.real, x.imag], axis=1)


def _as_complex(v):
    return v[:, :2] + 1j * v[:, 2:]


def _real_generator(a, b):
    """
    4x4 real form of M acting on (Re A, Re B, Im A, Im B).
    """
    n = len(a)
    m = np.zeros((n, 4, 4))
    br, bi = b.real, b.imag
    # Real block
    m[:, 0, 1], m[:, 1, 0] = br, br
    m[:, 0, 2], m[:, 2, 0] = -a, a
    m[:, 1, 3], m[:, 3, 1] = a, -a
    m[:, 0, 3], m[:, 1, 2] = -bi, bi
    m[:, 2, 1], m[:, 3, 0] = bi, -bi
    m[:, 2, 3], m[:, 3, 2] = br, br
    return m


def _heun_step(x, a, b):
    v = _as_real(x)
    m = _real_generator(a, b)
    # Predictor-corrector for a linear right-hand side with frozen increments
    predicted = v + np.einsum('nij,nj->ni', m, v)
    corrected = v + 0.5 * (np.einsum('nij,nj->ni', m, v)
                           + np.einsum('nij,nj->ni', m, predicted))
    return _as_complex(corrected)


def simulate_sde(params, omega, L, dz=1e-4, seed=0, n_paths=1, scheme='midpoint',
                 n_record=101, coefficients=None, stream=0, tol=None, chunk=1024):
    """
    Simulate the limit diffusion from (A, B) = (1, 0) at z = 0 to z = L.

    Parameters
    ----------
    params : MediumParams
    omega : float
    L : float
    dz : float, default 1e-4
    seed : int, default 0
        Master seed; path i draws from its own substream.
    n_paths : int, default 1
    scheme : {'midpoint', 'heun'}, default 'midpoint'
        Stratonovich implicit midpoint (Cayley map), or the Heun
        predictor-corrector on the four real components.
    n_record : int, default 101
        Number of recorded positions, including both ends.
    coefficients : ScatteringCoefficients, optional
        Defaults to the coefficients of `params` at `omega`.
    stream : int, default 0
        Extra stream key separating independent frequencies.
    tol : float, optional
        Largest accepted change of |A|^2 - |B|^2 over one step. Defaults to
        1e-6 for the midpoint scheme; Heun steps are not checked and their
        drift shows in `LimitPath.max_defect`.

    Returns
    -------
    LimitPath
    """
    if dz <= 0:
        raise ValueError(f"Step `dz` must be positive, got {dz}.")
    if L < 0:
        raise ValueError(f"Distance `L` must be nonnegative, got {L}.")
    if scheme not in SCHEMES:
        raise ValueError(f"SDE `scheme` must be one of {SCHEMES}, got {scheme!r}.")
    s2, d = sde_rates(params, omega, coefficients)
    s = np.sqrt(s2)
    step = _midpoint_step if scheme == 'midpoint' else _heun_step
    if tol is None:
        tol = 1e-6 if scheme == 'midpoint' else np.inf
    n_steps = max(1, int(np.ceil(L / dz - 1e-9))) if L > 0 else 0
    h = L / n_steps if n_steps else 0.0
    record_at = np.unique(np.round(np.linspace(0, n_steps, n_record)).astype(int))
    streams = spawn_streams(seed, range(n_paths), domain=SDE_STREAM, key=(stream,))

    x = np.zeros((n_paths, 2), dtype=complex)
    x[:, 0] = 1.0
    out = np.empty((n_paths, len(record_at), 2), dtype=complex)
    k = 0
    if record_at[0] == 0:
        out[:, 0] = x
        k = 1
    noise = None
    for i in range(n_steps):
        if i % chunk == 0:
            size = min(chunk, n_steps - i)
            noise = np.stack([rng.standard_normal((size, 2)) for rng in streams], axis=1)
        dw = np.sqrt(h) * noise[i % chunk]
        a, b = _generators(s, d, h, dw)
        before = np.abs(x[:, 0]) ** 2 - np.abs(x[:, 1]) ** 2
        x = step(x, a, b)
        change = np.abs(np.abs(x[:, 0]) ** 2 - np.abs(x[:, 1]) ** 2 - before)
        if np.max(change) > tol:
            raise ConservationError(
                f"Step {i} rejected, conservation changed by {np.max(change):.3g}.",
                defect=float(np.max(change)), z=(i + 1) * h
            )
        if k < len(record_at) and record_at[k] == i + 1:
            out[:, k] = x
            k += 1
    path = LimitPath(z=h * record_at, x=out)
    logger.debug(
        "SDE %s: %d paths, %d steps, max defect %.3g",
        scheme, n_paths, n_steps, path.max_defect
    )
    return path


def closed_form_moment(params, omega, L, coefficients=None):
    """
    E(omega) = exp(-theta'_0^2 omega^2 (Gamma_c + i Gamma_s) L / (8 c0^2)).
    """
    s2, d = sde_rates(params, omega, coefficients)
    return complex(np.exp(-(s2 + 1j * d) * L))


def sde_moment(params, omega, L, dz=1e-3, n_paths=2000, seed=0, scheme='midpoint',
               coefficients=None, stream=0):
    """
    Monte Carlo estimate of E[1 / conj(A(L))] under the limit diffusion.
    """
    path = simulate_sde(params, omega, L, dz=dz, seed=seed, n_paths=n_paths,
                        scheme=scheme, n_record=2, coefficients=coefficients,
                        stream=stream)
    return MomentEstimate.from_samples(1 / np.conj(path.final.x[:, 0]))


def moment_comparison(params, omega, L, n_paths=2000, seed=0, dz=1e-3,
                      scheme='midpoint', modes_estimate=None, coefficients=None):
    """
    Compare the SDE Monte Carlo moment, and optionally a coupled-mode
    ensemble moment, against the closed form. With `modes_estimate` the
    report also holds `sde_vs_modes_z`, the largest two-sample z-score
    between both estimates.

    Returns
    -------
    dict
    """
    if n_paths < 100:
        raise ValueError(f"`n_paths` must be at least 100, got {n_paths}.")
    target = closed_form_moment(params, omega, L, coefficients)
    estimate = sde_moment(params, omega, L, dz=dz, n_paths=n_paths, seed=seed,
                          scheme=scheme, coefficients=coefficients)
    report = {
        'omega': float(omega), 'L': float(L), 'scheme': scheme, 'dz': dz,
        'closed_form': [target.real, target.imag],
        'sde': estimate.to_dict(target),
    }
    if modes_estimate is not None:
        report['modes'] = modes_estimate.to_dict(target)
        report['sde_vs_modes_z'] = max(abs(v) for v in estimate.z_against(modes_estimate))
    logger.info(
        "SDE moment at omega=%g: z-score %.2f", omega, report['sde']['z_score'])
    return report
