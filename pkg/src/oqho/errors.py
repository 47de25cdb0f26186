"""Exception hierarchy shared by all modules."""


class OqhoError(Exception):
    """Base class for all errors raised by the package."""


class ModelError(OqhoError, ValueError):
    pass


class NotPositiveDefinite(ModelError):
    pass


class OddChannelCount(ModelError):
    pass


class NotSymmetric(ModelError):
    pass


class NotPSD(ModelError):
    pass


class NotStable(ModelError):
    """The drift matrix is not Hurwitz (decay rate mu <= 0)."""


class DomainError(OqhoError, ValueError):
    pass


class IndexOutOfRange(DomainError, IndexError):
    pass


class TimeOutOfDomain(DomainError):
    pass


class NumericalError(OqhoError, ArithmeticError):
    """Failures of an iterative or factorization routine (CLI exit code 3)."""


class ConvergenceFailure(NumericalError):
    pass


class SingularGamma(NumericalError):
    pass


class QuadratureBudgetExceeded(NumericalError):
    pass


class GridTooCoarse(DomainError):
    pass


class GridTooSmall(DomainError):
    pass


class AdmissibilityViolation(NumericalError):
    """Assembled covariance fails the quantum positivity check."""


class RadiusExceeded(OqhoError, ValueError):
    """Risk-sensitivity parameter outside the admissible range r_N < 1."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class BracketInvalid(OqhoError, ValueError):
    pass


class NotConverged(OqhoError):
    """Series did not settle within the truncation budget.

    The partial result is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(OqhoError, ValueError):
    """Bad run configuration (CLI exit code 2)."""
