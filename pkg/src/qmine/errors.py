"""Exception types shared across the package."""


class QmineError(Exception):
    """Base class for all package-specific errors."""


class SizeError(QmineError, ValueError):
    """Dimension mismatch or a dimension beyond the supported limit."""


class ValidationError(QmineError, ValueError):
    """An object violates one of its declared invariants."""


class ParameterError(QmineError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(QmineError, ValueError):
    """A scalar function was applied outside its domain."""
