"""Shared exception types."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; the message names the invariant."""
