"""Exception hierarchy shared by all modules."""


class ZeroDelayError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(ZeroDelayError, ValueError):
    """Matrix shapes are inconsistent with each other."""


class NotStabilizable(ZeroDelayError, ValueError):
    """The pair (A, B) has an unstable mode that B cannot reach."""


class NonPositiveInput(ZeroDelayError, ValueError):
    pass


class NoConvergence(ZeroDelayError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    Attributes
    ----------
    residual : float
        Last residual reached by the solver.
    iterations : int
        Iterations performed.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DimensionTooLarge(ZeroDelayError, ValueError):
    pass


class InvalidGp(ZeroDelayError, ValueError):
    """Normalized second moment below the sphere bound 1/(2*pi*e)."""


class DegenerateComponent(ZeroDelayError, RuntimeError):
    """A posterior variance exceeds its prior variance (internal error)."""


class NonPositiveVariance(ZeroDelayError, ValueError):
    pass


class NonPositiveSigma(ZeroDelayError, ValueError):
    pass


class BitstreamCorrupt(ZeroDelayError, ValueError):
    """The decoder could not parse the bitstream it was handed."""


class IndexOutOfSupport(ZeroDelayError, ValueError):
    pass


class ConfigError(ZeroDelayError, ValueError):
    """Malformed model or experiment configuration."""
