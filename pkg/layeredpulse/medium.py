"""
Random medium synthesis.

The fluctuation field V(z) is realized as a superposition of independent
Ornstein-Uhlenbeck modes, one per cell of a spectral grid on S = (-r_s, r_s).
Each mode relaxes at rate g(p) = mu |p|^(2 beta) and carries the stationary
variance w = int_cell a(p) |p|^(-2 alpha) dp, so that the autocorrelation of
the superposition reproduces R(z) = int_S exp(-g(p)|z|) a(p) |p|^(-2 alpha) dp.
The bounded medium fluctuation is nu = Theta(sqrt(eps) V).
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Separate seed domains keep medium, SDE and bootstrap streams independent
MEDIUM_STREAM = 0
SDE_STREAM = 1
RESAMPLE_STREAM = 2


def spawn_stream(master_seed, index, domain=MEDIUM_STREAM, key=()):
    """
    Counter-based random stream for one realization, derived only from
    `(master_seed, domain, index)` and the extra `key` entries, so results
    do not depend on scheduling.
    """
    entropy = [int(master_seed), int(domain), int(index)] + [int(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def spawn_streams(master_seed, indices, domain=MEDIUM_STREAM, key=()):
    return [spawn_stream(master_seed, i, domain=domain, key=key) for i in indices]


@dataclass(frozen=True)
class Nonlinearity:
    """
    Odd bounded map Theta(u) = cap * tanh(slope * u / cap).

    An infinite `cap` gives the linear map Theta(u) = slope * u, which is
    only accepted where boundedness is not required.
    """
    slope: float = 1.0
    cap: float = 0.95

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.isinf(self.cap):
            return self.slope * u
        return self.cap * np.tanh(self.slope * u / self.cap)

    @property
    def bounded(self):
        return bool(0 < self.cap < 1)


@dataclass(frozen=True)
class SpectralDensity:
    """
    Nonnegative spectral density a(p).

    Parameters
    ----------
    kind : {'indicator', 'gaussian', 'constant'}
        Indicator of (-half_width, half_width), a Gaussian exp(-p^2 /
        (2 half_width^2)), or the constant `level`.
    half_width : float
        Width parameter of the density.
    level : float, default 1.0
        Value of the density at p = 0.
    """
    kind: str = 'indicator'
    half_width: float = 10.0
    level: float = 1.0

    _kinds = ('indicator', 'gaussian', 'constant')

    def __post_init__(self):
        if self.kind not in self._kinds:
            raise ValueError(
                f"Spectral density kind must be one of {self._kinds}, got "
                f"{self.kind!r}."
            )
        if self.half_width <= 0:
            raise ValueError("Spectral density `half_width` must be positive.")
        if self.level <= 0:
            raise ValueError("Spectral density must be positive at p = 0.")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == 'indicator':
            return np.where(np.abs(p) < self.half_width, self.level, 0.0)
        elif self.kind == 'gaussian':
            return self.level * np.exp(-0.5 * (p / self.half_width) ** 2)
        return np.full_like(p, self.level)


@dataclass(frozen=True)
class MediumParams:
    """
    Parameters of the randomly layered medium.

    Parameters
    ----------
    mu : float
        Relaxation rate prefactor of the spectral modes.
    beta : float
        Exponent of the relaxation rate g(p) = mu |p|^(2 beta).
    alpha : float
        Exponent of the spectral singularity |p|^(-2 alpha), below 1/2.
    r_s : float
        Spectral half-width, S = (-r_s, r_s).
    density : SpectralDensity
        Spectral density a(p).
    theta : Nonlinearity
        Odd bounded nonlinearity, its slope at 0 is theta'_0.
    c0 : float
        Background propagation speed.
    """
    mu: float = 2.0
    beta: float = 0.5
    alpha: float = 0.25
    r_s: float = 10.0
    density: SpectralDensity = field(default_factory=SpectralDensity)
    theta: Nonlinearity = field(default_factory=Nonlinearity)
    c0: float = 1.0

    def __post_init__(self):
        if not self.alpha < 0.5:
            raise ValueError(
                f"Medium exponent `alpha` must be below 1/2, got {self.alpha}."
            )
        for name in ['mu', 'beta', 'r_s', 'c0']:
            if not getattr(self, name) > 0:
                raise ValueError(
                    f"Medium parameter `{name}` must be positive, got "
                    f"{getattr(self, name)}."
                )
        if self.theta.slope == 0:
            raise ValueError("Nonlinearity slope theta'_0 must be nonzero.")
        if not self.theta.bounded:
            raise ValueError(
                f"Nonlinearity cap must be finite and below 1 so that 1 + nu "
                f"stays positive, got {self.theta.cap}."
            )
        if not self.a0 > 0:
            raise ValueError("Spectral density must satisfy a(0) > 0.")

    @property
    def gamma(self):
        """
        Decay exponent of the autocorrelation tail, (1 - 2 alpha) / (2 beta).
        """
        return (1 - 2 * self.alpha) / (2 * self.beta)

    @property
    def hurst(self):
        return 1 - self.gamma / 2 if self.gamma < 1 else 0.5

    @property
    def theta_prime0(self):
        return self.theta.slope

    @property
    def a0(self):
        return float(self.density(0.0))

    def rate(self, p):
        return self.mu * np.abs(p) ** (2 * self.beta)

    def spectrum(self, p):
        """
        Spectral measure density r(p) = a(p) |p|^(-2 alpha) on S.
        """
        p = np.asarray(p, dtype=float)
        inside = np.abs(p) < self.r_s
        with np.errstate(divide='ignore'):
            r = self.density(p) * np.abs(p) ** (-2 * self.alpha)
        return np.where(inside, r, 0.0)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            'mu': self.mu, 'beta': self.beta, 'alpha': self.alpha,
            'r_s': self.r_s, 'c0': self.c0,
            'a': {'kind': self.density.kind,
                  'half_width': self.density.half_width,
                  'level': self.density.level},
            'theta': {'slope': self.theta.slope, 'cap': self.theta.cap},
        }

    @classmethod
    def from_dict(cls, doc):
        """
        Build parameters from a medium config block, accepting either nested
        `a`/`theta` sections or the dotted keys `a.kind`, `theta.cap`, etc.
        """
        doc = dict(doc)
        a = dict(doc.pop('a', {}) or {})
        theta = dict(doc.pop('theta', {}) or {})
        for key in list(doc):
            if key.startswith('a.'):
                a[key[2:]] = doc.pop(key)
            elif key.startswith('theta.'):
                theta[key[6:]] = doc.pop(key)
        theta_kwargs = {}
        if theta.get('slope') is not None:
            theta_kwargs['slope'] = float(theta['slope'])
        if theta.get('cap') is not None:
            theta_kwargs['cap'] = float(theta['cap'])
        kwargs = {
            key: float(doc[key]) for key in
            ['mu', 'beta', 'alpha', 'r_s', 'c0'] if doc.get(key) is not None
        }
        return cls(
            density=SpectralDensity(**a),
            theta=Nonlinearity(**theta_kwargs),
            **kwargs
        )


@dataclass(frozen=True)
class SpectralGrid:
    """
    Discretized spectral measure. Cells are ordered from -r_s to r_s and are
    symmetric about p = 0.
    """
    p_lo: np.ndarray
    p_hi: np.ndarray
    p: np.ndarray
    rates: np.ndarray
    weights: np.ndarray

    @property
    def n_modes(self):
        return len(self.weights)

    @property
    def variance(self):
        return float(np.sum(self.weights))


def build_spectral_grid(params, n_modes=512, p_min_ratio=1e-8):
    """
    Discretize the spectral measure with geometric refinement toward p = 0.

    Parameters
    ----------
    params : MediumParams
        Medium parameters.
    n_modes : int, default 512
        Total number of cells, split evenly between both half-lines.
    p_min_ratio : float, default 1e-8
        Ratio between the innermost cell edge and r_s.

    Returns
    -------
    SpectralGrid
    """
    if params.alpha >= 0.5:
        raise ValueError("Medium exponent `alpha` must be below 1/2.")
    if n_modes < 2 or n_modes % 2:
        raise ValueError(
            f"`n_modes` must be an even integer of at least 2, got {n_modes}."
        )
    if not 0 < p_min_ratio < 1:
        raise ValueError("`p_min_ratio` must lie in (0, 1).")
    half = n_modes // 2
    r_s = params.r_s

    # Edges r_s q^k, k = 0..half-1, then the innermost cell down to 0
    if half == 1:
        edges = np.array([r_s, 0.0])
    else:
        q = p_min_ratio ** (1.0 / (half - 1))
        edges = np.append(r_s * q ** np.arange(half), 0.0)
    hi, lo = edges[:-1], edges[1:]

    # Power-law factor integrated exactly on each cell
    expo = 1 - 2 * params.alpha
    mass = (hi ** expo - lo ** expo) / expo
    weights = params.density(0.5 * (lo + hi)) * mass
    # Representative point: geometric midpoint, mean point on the inner cell
    rep = np.sqrt(lo * hi)
    rep[lo == 0] = hi[lo == 0] * expo / (1 + expo)

    # Mirror onto the negative half-line, ordered from -r_s to r_s
    p = np.concatenate([-rep, rep[::-1]])
    p_lo = np.concatenate([-hi, lo[::-1]])
    p_hi = np.concatenate([-lo, hi[::-1]])
    weights = np.concatenate([weights, weights[::-1]])
    grid = SpectralGrid(
        p_lo=p_lo, p_hi=p_hi, p=p, rates=params.rate(p), weights=weights
    )
    logger.debug(
        "Spectral grid with %d modes, total weight %.6g", n_modes, grid.variance
    )
    return grid


def grid_autocorrelation(grid, z):
    """
    Autocorrelation reproduced by the discretized field, sum w exp(-g|z|).
    """
    z = np.abs(np.asarray(z, dtype=float))
    return np.exp(-np.multiply.outer(z, grid.rates)) @ grid.weights


@dataclass
class ModeState:
    """
    State of all spectral modes of one realization at position `z`.
    """
    z: float
    v: np.ndarray
    rng: np.random.Generator = field(repr=False)

    @property
    def value(self):
        return float(np.sum(self.v))


def sample_stationary(grid, seed):
    """
    Draw every mode from its stationary law N(0, w_i). Deterministic given
    `seed`.
    """
    rng = spawn_stream(seed, 0)
    v = np.sqrt(grid.weights) * rng.standard_normal(grid.n_modes)
    return ModeState(z=0.0, v=v, rng=rng)


def _ou_factors(grid, h):
    decay = np.exp(-grid.rates * h)
    spread = np.sqrt(grid.weights * -np.expm1(-2 * grid.rates * h))
    return decay, spread


def advance(state, h, grid):
    """
    Exact Ornstein-Uhlenbeck update of every mode over a step `h`.
    """
    if h < 0:
        raise ValueError(f"Step `h` must be nonnegative, got {h}.")
    if h == 0:
        return ModeState(z=state.z, v=state.v.copy(), rng=state.rng)
    decay, spread = _ou_factors(grid, h)
    xi = state.rng.standard_normal(grid.n_modes)
    return ModeState(z=state.z + h, v=decay * state.v + spread * xi, rng=state.rng)


def nu(value, eps, theta=Nonlinearity()):
    """
    Bounded medium fluctuation Theta(sqrt(eps) V).
    """
    if eps <= 0:
        raise ValueError(f"Scaling `eps` must be positive, got {eps}.")
    return theta(np.sqrt(eps) * np.asarray(value, dtype=float))


def realization_csv(params, eps, z_max, dz, seed, n_modes=512, path=None):
    """
    Sample one path of V and nu on the grid z = 0, dz, ..., z_max.

    Parameters
    ----------
    params : MediumParams
    eps : float
        Scaling parameter used in nu = Theta(sqrt(eps) V).
    z_max, dz : float
        Extent and step of the sampling grid, in medium units.
    seed : int
    n_modes : int, default 512
    path : str, optional
        If provided, the table is also written as CSV to this path.

    Returns
    -------
    pandas.DataFrame
        Columns `z`, `V`, `nu`.
    """
    if dz <= 0 or z_max <= 0:
        raise ValueError("Sampling step `dz` and extent `z_max` must be positive.")
    grid = build_spectral_grid(params, n_modes)
    n = int(np.floor(z_max / dz + 1e-9)) + 1
    state = sample_stationary(grid, seed)
    decay, spread = _ou_factors(grid, dz)
    values = np.empty(n)
    values[0] = state.value
    v = state.v
    for i in range(1, n):
        v = decay * v + spread * state.rng.standard_normal(grid.n_modes)
        values[i] = v.sum()
    table = pd.DataFrame({
        'z': dz * np.arange(n),
        'V': values,
        'nu': nu(values, eps, params.theta),
    })
    if path is not None:
        table.to_csv(path, index=False, float_format='%.12g')
        logger.info("Wrote %d medium samples to %s", n, path)
    return table


class MediumSampler(object):
    """
    Base class for batched medium samplers. A sampler holds `n` independent
    realizations and exposes the medium fluctuation `nu` at the current fast
    coordinate `t` (position divided by eps).
    """

    def __init__(self, n):
        self.n = int(n)
        self.t = 0.0

    @property
    def nu(self):
        raise NotImplementedError

    def advance(self, dt):
        raise NotImplementedError


class HomogeneousMedium(MediumSampler):
    """
    Medium switched off, nu = 0 everywhere.
    """

    @property
    def nu(self):
        return np.zeros(self.n)

    def advance(self, dt):
        self.t += dt


class ProfileMedium(MediumSampler):
    """
    Deterministic medium nu(t) = profile(t), identical for every member.
    """

    def __init__(self, n, profile):
        super().__init__(n)
        self.profile = profile

    @property
    def nu(self):
        return np.full(self.n, float(self.profile(self.t)))

    def advance(self, dt):
        self.t += dt


class RandomMedium(MediumSampler):
    """
    Batch of independent medium realizations driven by exact OU updates.

    Each member owns a counter-based stream, draws are consumed per member
    in a fixed order, so a realization is identical whatever batch it is
    computed in.

    Parameters
    ----------
    params : MediumParams
    eps : float
        Scaling parameter.
    grid : SpectralGrid
    streams : list of numpy.random.Generator
        One stream per realization.
    chunk : int, default 64
        Number of OU steps drawn ahead per member.
    """

    def __init__(self, params, eps, grid, streams, chunk=64):
        super().__init__(len(streams))
        self.params = params
        self.eps = eps
        self.grid = grid
        self.streams = list(streams)
        self.chunk = int(chunk)
        self._factors = {}
        self._buffer = None
        self._cursor = self.chunk
        # Stationary start
        scale = np.sqrt(grid.weights)
        self.values = np.stack([
            scale * rng.standard_normal(grid.n_modes) for rng in self.streams
        ])

    @classmethod
    def from_seed(cls, params, eps, grid, master_seed, indices, **kwargs):
        return cls(params, eps, grid, spawn_streams(master_seed, indices), **kwargs)

    def _noise(self):
        if self._cursor == self.chunk:
            self._buffer = np.stack([
                rng.standard_normal((self.chunk, self.grid.n_modes))
                for rng in self.streams
            ], axis=1)
            self._cursor = 0
        xi = self._buffer[self._cursor]
        self._cursor += 1
        return xi

    @property
    def V(self):
        return self.values.sum(axis=1)

    @property
    def nu(self):
        return self.params.theta(np.sqrt(self.eps) * self.V)

    def advance(self, dt):
        if dt <= 0:
            return
        key = float(dt)
        if key not in self._factors:
            self._factors[key] = _ou_factors(self.grid, dt)
        decay, spread = self._factors[key]
        self.values = decay * self.values + spread * self._noise()
        self.t += dt
