"""Exception hierarchy shared by the solver, simulator and CLI."""


class PPIError(Exception):
    """Base class for all package errors."""


class DomainError(PPIError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class QuadratureError(PPIError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ConvergenceError(PPIError):
    """An iterative root search hit its iteration or bracket cap."""


class NoSolutionError(PPIError):
    """The existence gates for the optimal multiplier fail."""


class ConfigError(PPIError, ValueError):
    pass


class DataError(PPIError, ValueError):
    pass


class AdmissibilityError(PPIError):
    """A terminal cushion fell below -G, so the strategy was not admissible."""
