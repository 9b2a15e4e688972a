"""Shared exception types."""


class NumericalError(RuntimeError):
    """A numerically impossible or degenerate operation (singular matrix,
    uncontrollable pair, failed gain synthesis)."""
