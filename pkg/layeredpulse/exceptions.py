"""
Exception and warning types raised by the package.
"""


class LayeredPulseError(Exception):
    """
    Base class for all package errors.
    """


class ConfigError(LayeredPulseError, ValueError):
    """
    Raised when a run configuration cannot be parsed or fails validation.

    Parameters
    ----------
    message : str
        Human readable description.
    errors : dict, optional
        Validation errors as produced by `cerberus`, keyed by field.
    """

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class QuadratureError(LayeredPulseError, RuntimeError):
    """
    Raised when an adaptive quadrature fails to reach its tolerance.
    """

    def __init__(self, message, abserr=None):
        super().__init__(message)
        self.abserr = abserr


class ConservationError(LayeredPulseError, RuntimeError):
    """
    Raised when the flux invariant |A|^2 - |B|^2 = 1 drifts beyond the
    allowed threshold during integration.
    """

    def __init__(self, message, defect=None, z=None):
        super().__init__(message)
        self.defect = defect
        self.z = z


class DivergentCoefficientError(LayeredPulseError, ValueError):
    """
    Raised when a scattering coefficient is requested where it diverges,
    i.e. at zero frequency in the long-range and critical regimes.
    """


class NumericalWarning(UserWarning):
    """
    Warning for recoverable numerical issues such as truncated memory tails.
    """


class ToleranceFailure(LayeredPulseError):
    """
    Raised when a completed study misses one of its declared tolerances.

    Parameters
    ----------
    report : CheckReport
        Report of the study, holding every check and its outcome.
    """

    def __init__(self, report):
        names = ', '.join(check.name for check in report.failures)
        super().__init__(f"Study {report.study} failed checks: {names}")
        self.report = report
