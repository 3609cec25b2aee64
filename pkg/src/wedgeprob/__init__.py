"""Wedge probabilities for Brownian motion between two slanted lines."""

from .core import (
    DerivedParams,
    DomainError,
    EvalResult,
    InternalConsistencyError,
    Method,
    PlanningError,
    TruncationPlan,
    WedgeError,
    WedgeProblem,
    derive_params,
    gauss_mass,
    scaled_gauss_mass,
)

__version__ = "0.1.0"

__all__ = [
    "DerivedParams",
    "DomainError",
    "EvalResult",
    "InternalConsistencyError",
    "Method",
    "PlanningError",
    "TruncationPlan",
    "WedgeError",
    "WedgeProblem",
    "derive_params",
    "gauss_mass",
    "scaled_gauss_mass",
    "__version__",
]
