"""Exception hierarchy shared by all modules."""


class BargainError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(BargainError, ValueError):
    """Vectors of incompatible length were combined."""


class DomainError(BargainError, ValueError):
    """A utility inverse was requested outside the range of the utility."""

    def __init__(self, message, supremum=None, infimum=None):
        super().__init__(message)
        self.supremum = supremum
        self.infimum = infimum


class InfeasibleRiskError(BargainError):
    """The target utility level U(w) - r is not attainable by any price."""


class PricingError(BargainError, ArithmeticError):
    """The reservation-price root finder failed to converge."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class StepSolverError(BargainError, ArithmeticError):
    """The per-period fixed-point solve did not converge within its cap."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConvergenceError(BargainError):
    """A trajectory did not reach its convergence tolerance."""
