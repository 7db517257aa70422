import logging

from layeredpulse.processors import ProcessFunction, ProcessSchema
from layeredpulse.validation import ExtendedValidator as Validator
from layeredpulse.study import Artifact, Check, CheckReport, ProcessLayer, Study
from layeredpulse.exceptions import (
    ConfigError, ConservationError, DivergentCoefficientError, LayeredPulseError,
    NumericalWarning, QuadratureError, ToleranceFailure)
from layeredpulse.medium import (
    HomogeneousMedium, MediumParams, Nonlinearity, ProfileMedium, RandomMedium,
    SpectralDensity, build_spectral_grid)
from layeredpulse.correlation import (
    SpectralRule, autocorrelation, limit_coefficients, regime,
    scaled_coefficients, scattering_coefficients, tail_constants)
from layeredpulse.kernel import PulseField, Source, pulse_front
from layeredpulse.modes import Channel, mode_ensemble, propagate
from layeredpulse.limit_sde import closed_form_moment, sde_moment, simulate_sde
from layeredpulse.stats import hurst_estimate, scaling_study, travel_time_ensemble
from layeredpulse.fractional import SampledSignal, kk_residual, weyl_derivative
from layeredpulse.config import RunConfig, load_config

logging.getLogger(__name__).addHandler(logging.NullHandler())
