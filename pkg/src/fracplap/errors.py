"""Exception hierarchy shared by all modules."""


class FracPLapError(Exception):
    """Base class for every error raised by the package."""


class ParameterDomainError(FracPLapError, ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class ConfigurationError(FracPLapError, ValueError):
    """Inconsistent discretisation parameters (h/r coupling, CFL, ...)."""


class CflViolation(ConfigurationError):
    """The requested time step exceeds the CFL bound."""


class ContractError(FracPLapError, ValueError):
    """A caller-supplied object lacks data the operation needs."""


class QuadratureError(FracPLapError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class DomainCoverageError(FracPLapError, LookupError):
    """A lattice sample point could not be resolved."""

    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


class NumericalFailure(FracPLapError, ArithmeticError):
    """Non-finite values appeared while time stepping."""

    def __init__(self, message, index=None, step=None):
        super().__init__(message)
        self.index = index
        self.step = step


class InsufficientDataError(FracPLapError, ValueError):
    """Too few usable points for a convergence fit."""
