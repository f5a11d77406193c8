"""Exception types shared across the package."""


class NfsynthError(Exception):
    """Base class for all package errors."""


class DomainError(NfsynthError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class GeometryError(NfsynthError, ValueError):
    """Geometric constraint violated (overlap, containment, degeneracy)."""


class ConfigurationError(NfsynthError, ValueError):
    """Inconsistent or insufficient configuration."""


class DataError(NfsynthError, ValueError):
    """Non-finite or malformed numerical data."""
