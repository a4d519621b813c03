"""Exception types shared across the package."""


class MpsError(Exception):
    """Base class for package errors."""


class LayoutError(MpsError, ValueError):
    """Invalid grid, patch layout or connectivity."""


class OutOfDomainError(MpsError, ValueError):
    """A coordinate fell outside a non-periodic domain."""


class ConfigError(MpsError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class NumericalError(MpsError, ArithmeticError):
    """A numerical procedure failed (singular system, no convergence)."""
