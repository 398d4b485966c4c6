"""Exception types raised by the library."""


class IvanovError(Exception):
    """Base class for all library errors."""


class DomainError(IvanovError, ValueError):
    """A point lies outside the kernel domain or has the wrong dimension."""


class NotPSDError(IvanovError, ValueError):
    """A matrix expected to be positive semi-definite has a clearly negative eigenvalue."""


class ConvergenceError(IvanovError, RuntimeError):
    """Bisection exhausted its iteration budget before reaching tolerance."""


class NumericalError(IvanovError, RuntimeError):
    """A linear solve or similar numerical step failed."""


class ConfigError(IvanovError, ValueError):
    """A scenario or CLI configuration is malformed."""
