"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input (document, instance, matching, parameter) is invalid."""


class InternalError(RuntimeError):
    """Raised when a solver invariant fails; indicates a bug, not bad input."""
