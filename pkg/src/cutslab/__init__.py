"""Space-time cut finite element solver for the 1D heat equation on a fixed
background mesh with a translating overlapping mesh."""

from .core import (
    Discretization,
    ExactSolution,
    GeometryViolation,
    NumericalFailure,
    OverlapSpec,
    ProblemSpec,
    Setup,
    manufactured_problem,
    zero_problem,
)
from .norms import NormBreakdown, lls_slope, xnorm_error
from .solver import march

__all__ = [
    "Discretization",
    "ExactSolution",
    "GeometryViolation",
    "NumericalFailure",
    "NormBreakdown",
    "OverlapSpec",
    "ProblemSpec",
    "Setup",
    "lls_slope",
    "manufactured_problem",
    "march",
    "xnorm_error",
    "zero_problem",
]
