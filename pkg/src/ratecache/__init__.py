"""Cache-rate / update-rate trade-offs for caching with request side information."""

from .errors import (ArityError, BudgetError, DomainError, InfeasibleError, RateCacheError,
                     ValidationError)
from .probcore import CachingProblem, JointPmf, Pmf, TestChannel, induced_joint
from .singleuser import (Boundary, RatePoint, TracerConfig, achievable_point, grid_oracle, rc_star, ru_star,
                         trace_boundary)

__all__ = [
    "ArityError", "BudgetError", "DomainError", "InfeasibleError", "RateCacheError", "ValidationError",
    "CachingProblem", "JointPmf", "Pmf", "TestChannel", "induced_joint",
    "Boundary", "RatePoint", "TracerConfig", "achievable_point", "grid_oracle", "rc_star", "ru_star",
    "trace_boundary",
]
