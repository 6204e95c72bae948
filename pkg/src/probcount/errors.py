"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed a configured size or cost limit."""
