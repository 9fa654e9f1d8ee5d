"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input violates a documented precondition."""


class DomainError(ValueError):
    """A point lies outside the domain where a map or function is defined."""


class CoverageError(ValueError):
    """A lookup table does not cover a requested node."""
