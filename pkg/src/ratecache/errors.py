"""Exception types shared across the package."""


class RateCacheError(Exception):
    """Base class for all library errors."""


class ValidationError(RateCacheError, ValueError):
    """Malformed input: bad shapes, negative mass, unnormalized tables, ..."""


class DomainError(RateCacheError, ValueError):
    """A scalar argument lies outside the domain of the operation."""


class ArityError(RateCacheError, ValueError):
    """The problem carries the wrong number of request functions."""


class BudgetError(RateCacheError):
    """A brute-force enumeration would exceed its size guard."""


class InfeasibleError(RateCacheError):
    """No candidate satisfies the requested constraint."""
