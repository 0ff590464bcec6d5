"""Exception types shared across the package."""


class HawkespopError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(HawkespopError):
    """Coefficient and initial-condition vectors have inconsistent lengths."""


class NonPositiveKernel(HawkespopError):
    """A fertility function dips below zero on the validation grid."""


class DuplicateRate(HawkespopError):
    """Exponential-mode decay rates coincide; distinct modes required."""


class MarkMomentError(HawkespopError):
    """Exponential moment of the mark-dependent initial stack is not finite."""


class MajorantViolation(HawkespopError):
    """Thinning intensity exceeded its dominating bound (internal invariant)."""


class ExplosionGuard(HawkespopError):
    """A simulated path exceeded the configured event cap."""


class BlowUp(HawkespopError):
    """A backward exponent ODE blew up before reaching time zero."""

    def __init__(self, message, blowup_time=None):
        super().__init__(message)
        self.blowup_time = blowup_time


class QuadratureFailure(HawkespopError):
    """A mark integral could not be evaluated (infinite exponential moment)."""


class ZeroVariance(HawkespopError):
    """All Monte Carlo paths produced the same value; z-score undefined."""


class ConfigError(HawkespopError):
    """Experiment configuration file is invalid."""
