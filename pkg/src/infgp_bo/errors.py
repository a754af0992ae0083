"""Exception types raised across the package."""


class InfGPError(Exception):
    """Base class for all package errors."""


class FactorizationFailure(InfGPError, ArithmeticError):
    """Cholesky factorization failed even after the maximum jitter."""


class InvalidParameter(InfGPError, ValueError):
    pass


class DegenerateWeights(InfGPError, ValueError):
    pass


class DimensionMismatch(InfGPError, ValueError):
    pass


class ChainDivergence(InfGPError, RuntimeError):
    """A Metropolis chain accepted no proposals over its whole run."""


class OutOfBounds(InfGPError, ValueError):
    pass


class ConfigError(InfGPError, ValueError):
    """Configuration problem. ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
