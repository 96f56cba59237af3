"""Exception hierarchy shared across the package."""


class PoissonCMEError(Exception):
    """Base class for all library errors."""


class DomainError(PoissonCMEError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class MomentError(PoissonCMEError, ValueError):
    """A required moment of the input distribution does not exist."""


class DivergenceError(PoissonCMEError, ValueError):
    """An expectation such as E[log(aX + lambda)] diverges."""


class UnsupportedOrderError(PoissonCMEError):
    """Derivative order beyond what a closed form evaluates stably."""


class UnsupportedRouteError(PoissonCMEError):
    """The requested computation route does not apply to this prior/channel."""


class CancellationError(PoissonCMEError):
    """An alternating sum lost too many significant digits."""


class TruncationError(PoissonCMEError):
    """An index lies outside the truncated support of an output pmf."""


class DegenerateEvidenceError(PoissonCMEError):
    """P_Y(y) is too small to condition on."""


class NoObservationsError(PoissonCMEError):
    """No empirical counts at the requested output value."""


class DegenerateFitError(PoissonCMEError):
    """A linear fit cannot be mapped to a gamma surrogate."""


class LinearityViolation(PoissonCMEError):
    """The conditions for an exactly linear conditional mean are not met."""
