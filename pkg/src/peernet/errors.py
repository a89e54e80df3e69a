"""Exception types raised across the package."""


class InvalidSpecError(ValueError):
    """A graph ensemble, parameter bundle or configuration is malformed."""


class SpectralValidityError(ValueError):
    """The resolvent (I - rho M)^{-1} is not guaranteed to exist.

    ``bound`` carries the measured operator bound (1 for the row-normalized
    operator, lambda_1(A) for the adjacency matrix).
    """

    def __init__(self, message, rho=None, bound=None):
        super().__init__(message)
        self.rho = rho
        self.bound = bound


class NumericError(ArithmeticError):
    """An iterative method failed to converge.

    ``diagnostics`` is a dict with the last iterate summary (iterations,
    residual, current estimate) so callers can report what happened.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class SizeError(ValueError):
    """An oracle was asked to run beyond its size cap."""


class FormatError(ValueError):
    """A file does not follow the expected text/CSV layout."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""
