"""Scheduling of non-preemptive flexible loads by relaxation, lossless adjustment and rounding."""

from ._kernels import BACKEND
from .errors import FlexSchedError
from .model import (
    EPS_INT,
    CostKind,
    CostModel,
    Instance,
    Job,
    ShapeKind,
    admissible_starts,
    aggregate_load,
    check_feasibility,
    evaluate_cost,
    profile_column,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EPS_INT",
    "CostKind",
    "CostModel",
    "FlexSchedError",
    "Instance",
    "Job",
    "ShapeKind",
    "admissible_starts",
    "aggregate_load",
    "check_feasibility",
    "evaluate_cost",
    "profile_column",
]
