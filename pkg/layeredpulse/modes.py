"""
Coupled-mode propagation through sampled medium realizations.

For every channel (omega, |kappa|) the propagator entries (alpha, beta) solve

    d/dz (alpha, beta) = (1/eps) nu(z/eps) H(z/eps) (alpha, beta),
    H(t) = i omega / (2 lambda c0^2) [[1, exp(-2i omega lambda t)],
                                      [-exp(2i omega lambda t), -1]],

from (1, 0) at z = 0. All channels of one realization share the medium.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from layeredpulse.exceptions import ConservationError
from layeredpulse.limit_sde import MomentEstimate, closed_form_moment
from layeredpulse.medium import RandomMedium, build_spectral_grid

logger = logging.getLogger(__name__)

METHODS = ('magnus', 'rk4')


@dataclass(frozen=True)
class Channel:
    """
    Propagating channel with lambda_eps = sqrt(1 - eps c0^2 |kappa|^2) / c0.
    """
    omega: float
    kappa_mag: float
    lambda_eps: float

    @classmethod
    def admissible(cls, omega, kappa_mag=0.0, eps=0.01, c0=1.0):
        arg = 1 - eps * c0 ** 2 * kappa_mag ** 2
        if not arg > 0:
            raise ValueError(
                f"Channel with |kappa|={kappa_mag} is evanescent at eps={eps} "
                f"(requires |kappa| < 1 / (c0 sqrt(eps)))."
            )
        if omega == 0:
            raise ValueError("Channel frequency `omega` must be nonzero.")
        return cls(float(omega), float(kappa_mag), float(np.sqrt(arg) / c0))


@dataclass
class ModeTrajectory:
    """
    Recorded propagator entries, arrays of shape (n_real, n_channels, n_z),
    and the running integral of nu(z/eps) of shape (n_real, n_z).
    """
    channels: list
    eps: float
    c0: float
    z_samples: np.ndarray
    alpha_eps: np.ndarray
    beta_eps: np.ndarray
    nu_integral: np.ndarray

    def _column(self, attr):
        return np.array([getattr(ch, attr) for ch in self.channels])[None, :, None]

    @property
    def phi_eps(self):
        lam = self._column('lambda_eps')
        return self.nu_integral[:, None, :] / (2 * lam * self.c0 ** 2)

    @property
    def tau_eps(self):
        lam = self._column('lambda_eps')
        return 2 * lam * self.z_samples + 2 * self.phi_eps

    @property
    def a_comp(self):
        omega = self._column('omega')
        return self.alpha_eps * np.exp(-1j * omega * self.phi_eps / self.eps)

    @property
    def b_comp(self):
        omega = self._column('omega')
        return self.beta_eps * np.exp(1j * omega * self.phi_eps / self.eps)

    @property
    def defect(self):
        return np.abs(self.alpha_eps) ** 2 - np.abs(self.beta_eps) ** 2 - 1

    @property
    def max_defect(self):
        return float(np.max(np.abs(self.defect)))


def default_step(channels, eps, c0=1.0):
    """
    Step eps / (20 max(1, omega lambda c0)) over the channels.
    """
    scale = max(1.0, max(abs(ch.omega) * ch.lambda_eps * c0 for ch in channels))
    return eps / (20 * scale)


def _generator(channels, nu, z, eps, c0):
    """
    Diagonal coefficient `a` and off-diagonal `b` of the generator
    [[i a, b], [conj(b), -i a]] at position z, shaped (n_real, n_channels).
    """
    omega = np.array([ch.omega for ch in channels])
    lam = np.array([ch.lambda_eps for ch in channels])
    a = nu[:, None] * omega / (2 * lam * c0 ** 2 * eps)
    b = 1j * a * np.exp(-2j * omega * lam * z / eps)
    return a, b


def _exp_su11(a, b):
    """
    Exponential of [[i a, b], [conj(b), -i a]], returned as its entries
    (e11, e12, e21, e22).
    """
    s2 = np.abs(b) ** 2 - a ** 2
    root = np.sqrt(np.abs(s2))
    small = root < 1e-8
    safe = np.where(small, 1.0, root)
    ch = np.where(s2 >= 0, np.cosh(root), np.cos(root))
    sh = np.where(s2 >= 0, np.sinh(root), np.sin(root)) / safe
    sh = np.where(small, 1 + s2 / 6, sh)
    ch = np.where(small, 1 + s2 / 2, ch)
    return ch + 1j * a * sh, b * sh, np.conj(b) * sh, ch - 1j * a * sh


def _magnus_step(alpha, beta, gens, h):
    # Simpson average of the generator, exponentiated exactly
    (a0, b0), (a1, b1), (a2, b2) = gens
    a = h * (a0 + 4 * a1 + a2) / 6
    b = h * (b0 + 4 * b1 + b2) / 6
    e11, e12, e21, e22 = _exp_su11(a, b)
    return e11 * alpha + e12 * beta, e21 * alpha + e22 * beta


def _rk4_step(alpha, beta, gens, h):
    def rhs(gen, al, be):
        a, b = gen
        return 1j * a * al + b * be, np.conj(b) * al - 1j * a * be

    g0, g1, g2 = gens
    k1 = rhs(g0, alpha, beta)
    k2 = rhs(g1, alpha + 0.5 * h * k1[0], beta + 0.5 * h * k1[1])
    k3 = rhs(g1, alpha + 0.5 * h * k2[0], beta + 0.5 * h * k2[1])
    k4 = rhs(g2, alpha + h * k3[0], beta + h * k3[1])
    return (alpha + h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6,
            beta + h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6)


def propagate(params, eps, channels, L, seed=0, indices=(0,), dz=None,
              method='magnus', medium=None, n_modes=512, n_record=101, tol=1e-8):
    """
    Integrate the coupled-mode equations through a batch of realizations.

    Parameters
    ----------
    params : MediumParams
    eps : float
        Scaling parameter.
    channels : list of Channel
    L : float
        Slab thickness.
    seed : int, default 0
        Master seed of the medium realizations.
    indices : sequence of int, default (0,)
        Realization indices computed in this batch.
    dz : float, optional
        Step, default `default_step(channels, eps)` rounded to divide L.
    method : {'magnus', 'rk4'}, default 'magnus'
    medium : MediumSampler, optional
        Sampler used instead of the random medium, e.g. `HomogeneousMedium`.
    n_modes : int, default 512
        Spectral modes of the random medium.
    n_record : int, default 101
        Recorded positions, including both ends.
    tol : float, default 1e-8
        Largest accepted conservation defect.

    Returns
    -------
    ModeTrajectory
    """
    if eps <= 0:
        raise ValueError(f"Scaling `eps` must be positive, got {eps}.")
    if L <= 0:
        raise ValueError(f"Slab thickness `L` must be positive, got {L}.")
    if method not in METHODS:
        raise ValueError(f"Mode `method` must be one of {METHODS}, got {method!r}.")
    channels = list(channels)
    c0 = params.c0
    for ch in channels:
        if not np.isclose(ch.lambda_eps, Channel.admissible(ch.omega, ch.kappa_mag, eps, c0).lambda_eps):
            raise ValueError(f"Channel {ch} was built for a different eps or c0.")
    dz = default_step(channels, eps, c0) if dz is None else dz
    n_steps = int(np.ceil(L / dz - 1e-9))
    h = L / n_steps
    if medium is None:
        grid = build_spectral_grid(params, n_modes)
        medium = RandomMedium.from_seed(params, eps, grid, seed, indices)
    n_real = medium.n
    step = _magnus_step if method == 'magnus' else _rk4_step
    record_at = np.unique(np.round(np.linspace(0, n_steps, n_record)).astype(int))

    alpha = np.ones((n_real, len(channels)), dtype=complex)
    beta = np.zeros((n_real, len(channels)), dtype=complex)
    integral = np.zeros(n_real)
    out_a = np.empty((n_real, len(channels), len(record_at)), dtype=complex)
    out_b = np.empty_like(out_a)
    out_i = np.empty((n_real, len(record_at)))
    out_a[..., 0], out_b[..., 0], out_i[:, 0] = alpha, beta, integral
    k = 1
    nu0 = medium.nu
    for i in range(n_steps):
        z = i * h
        # Two exact half-steps of the medium in fast units
        medium.advance(0.5 * h / eps)
        nu1 = medium.nu
        medium.advance(0.5 * h / eps)
        nu2 = medium.nu
        gens = [_generator(channels, nu, z + f * h, eps, c0)
                for nu, f in ((nu0, 0.0), (nu1, 0.5), (nu2, 1.0))]
        alpha, beta = step(alpha, beta, gens, h)
        integral = integral + h * (nu0 + 4 * nu1 + nu2) / 6
        nu0 = nu2
        if k < len(record_at) and record_at[k] == i + 1:
            defect = np.max(np.abs(np.abs(alpha) ** 2 - np.abs(beta) ** 2 - 1))
            if defect > tol:
                raise ConservationError(
                    f"Conservation defect {defect:.3g} at z={(i + 1) * h:.6g} "
                    f"exceeds {tol:g} ({method}, dz={h:.3g}).",
                    defect=float(defect), z=(i + 1) * h
                )
            out_a[..., k], out_b[..., k], out_i[:, k] = alpha, beta, integral
            k += 1
    logger.debug(
        "Propagated %d realizations over %d steps of %.3g", n_real, n_steps, h)
    return ModeTrajectory(
        channels=channels, eps=eps, c0=c0, z_samples=h * record_at,
        alpha_eps=out_a, beta_eps=out_b, nu_integral=out_i,
    )


@dataclass
class ModeEnsemble:
    """
    Compensated amplitudes at z = L, arrays of shape (n_real, n_channels).
    """
    channels: list
    a_comp: np.ndarray
    b_comp: np.ndarray

    @property
    def transmission(self):
        return 1 / np.conj(self.a_comp)

    @property
    def backscatter(self):
        return self.b_comp / np.conj(self.a_comp)


def mode_ensemble(params, eps, channels, L, n_real, master_seed=0, batch_size=50,
                  workers=1, **kwargs):
    """
    Final compensated amplitudes of `n_real` realizations, computed in
    batches over a thread pool. Results depend only on the realization
    index, not on `batch_size` or `workers`.
    """
    batches = [range(i, min(i + batch_size, n_real)) for i in range(0, n_real, batch_size)]

    def run(indices):
        traj = propagate(params, eps, channels, L, seed=master_seed,
                         indices=indices, n_record=2, **kwargs)
        return traj.a_comp[..., -1], traj.b_comp[..., -1]

    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        results = list(pool.map(run, batches))
    logger.info(
        "Mode ensemble: %d realizations, %d channels, eps=%g",
        n_real, len(channels), eps)
    return ModeEnsemble(
        channels=list(channels),
        a_comp=np.concatenate([r[0] for r in results]),
        b_comp=np.concatenate([r[1] for r in results]),
    )


def transmission_moment(params, eps, channel, L, n_real, master_seed=0, **kwargs):
    """
    Ensemble mean of 1 / conj(A_eps(L)) with CLT standard errors.
    """
    ens = mode_ensemble(params, eps, [channel], L, n_real, master_seed, **kwargs)
    return MomentEstimate.from_samples(ens.transmission[:, 0])


def backscatter_moment(params, eps, channel, L, n_real, master_seed=0, **kwargs):
    """
    Ensemble mean of B_eps(L) / conj(A_eps(L)).
    """
    ens = mode_ensemble(params, eps, [channel], L, n_real, master_seed, **kwargs)
    return MomentEstimate.from_samples(ens.backscatter[:, 0])


def cross_channel_covariance(params, eps, channels, L, n_real, master_seed=0, **kwargs):
    """
    Covariance of 1 / conj(A_1) and 1 / A_2 over a shared medium.

    Returns
    -------
    MomentEstimate
        Mean of the centered products, whose mean is the covariance.
    """
    ch1, ch2 = channels
    ens = mode_ensemble(params, eps, [ch1, ch2], L, n_real, master_seed, **kwargs)
    x = 1 / np.conj(ens.a_comp[:, 0])
    y = 1 / ens.a_comp[:, 1]
    return MomentEstimate.from_samples((x - x.mean()) * (y - y.mean()))


def transmission_ladder(params, eps_ladder, omega, L, n_real, kappa_mag=0.0,
                        master_seed=0, **kwargs):
    """
    Error of the transmission moment against its closed form along a ladder
    of decreasing `eps`.

    Returns
    -------
    pandas.DataFrame
        Columns `eps, mean_re, mean_im, error, stderr, z_score`, ordered by
        decreasing `eps`.
    """
    target = closed_form_moment(params, omega, L)
    rows = []
    for eps in sorted(eps_ladder, reverse=True):
        channel = Channel.admissible(omega, kappa_mag, eps, params.c0)
        est = transmission_moment(params, eps, channel, L, n_real, master_seed, **kwargs)
        rows.append({
            'eps': eps, 'mean_re': est.mean.real, 'mean_im': est.mean.imag,
            'error': abs(est.mean - target), 'stderr': est.stderr,
            'z_score': max(abs(v) for v in est.z_scores(target)),
        })
        logger.info("Transmission at eps=%g: error %.4g, stderr %.4g",
                    eps, rows[-1]['error'], est.stderr)
    return pd.DataFrame(rows)


def trend_violations(errors, stderrs, z=3.0):
    """
    Number of refinement steps whose error grows by more than `z` combined
    standard errors.
    """
    errors = np.asarray(errors, dtype=float)
    stderrs = np.asarray(stderrs, dtype=float)
    if errors.shape != stderrs.shape:
        raise ValueError("`errors` and `stderrs` must have the same shape.")
    growth = np.diff(errors)
    noise = z * np.hypot(stderrs[1:], stderrs[:-1])
    return int(np.sum(growth > noise))
