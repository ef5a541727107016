"""Shared exception types."""


class DomainError(ValueError):
    """An argument violates a mathematical precondition."""


class UnsupportedRegimeError(DomainError):
    """The requested Hurst regime is outside the operation's validity range."""


class ExactZeroMoment(Exception):
    """Signals that a moment is exactly zero, so no upper bound is needed."""


class CirculantEmbeddingError(RuntimeError):
    """Davies-Harte circulant embedding produced a negative eigenvalue."""
