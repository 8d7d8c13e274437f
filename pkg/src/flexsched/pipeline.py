"""Relax, adjust, round."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adjust import AdjustReport, adjust_realistic, adjust_rectangular
from .model import Instance, aggregate_load, count_fractional, evaluate_cost
from .relax import RelaxSolution, SolverConfig, solve_relaxation
from .rounding import RoundingConfig, round_schedule


@dataclass
class RarResult:
    relaxation: RelaxSolution
    adjusted: np.ndarray
    adjust_report: AdjustReport
    schedule: np.ndarray
    load: np.ndarray
    cost: float
    timings: dict = field(default_factory=dict)

    @property
    def relaxed_cost(self) -> float:
        return self.relaxation.objective

    @property
    def fractional_relaxed(self) -> int:
        return count_fractional(self.relaxation.schedule)


def _algorithm(instance: Instance, algorithm: str) -> str:
    if algorithm == "auto":
        return "rectangular" if instance.all_flat else "realistic"
    if algorithm not in ("rectangular", "realistic"):
        raise ValueError(f"unknown adjustment {algorithm!r}")
    return algorithm


def rar(instance: Instance, solver_config: Optional[SolverConfig] = None,
        rounding_config: Optional[RoundingConfig] = None, algorithm: str = "auto",
        relaxation: Optional[RelaxSolution] = None, job_ids: Optional[Sequence[int]] = None,
        kernels=None) -> RarResult:
    """Full pipeline on ``instance``.

    ``algorithm`` is ``"rectangular"``, ``"realistic"`` or ``"auto"`` (cycle
    cancellation when every job is flat). A precomputed ``relaxation`` skips
    the solve. Raises NotConverged from the solver.
    """
    rounding_config = rounding_config or RoundingConfig()
    timings = {}
    t0 = time.perf_counter()
    if relaxation is None:
        relaxation = solve_relaxation(instance, solver_config)
    t1 = time.perf_counter()
    eps = rounding_config.eps
    if _algorithm(instance, algorithm) == "rectangular":
        adjusted, report = adjust_rectangular(instance, relaxation.schedule, eps, kernels=kernels)
    else:
        adjusted, report = adjust_realistic(instance, relaxation.schedule, eps, kernels=kernels)
    t2 = time.perf_counter()
    if job_ids is None:
        job_ids = [j.id for j in instance.jobs]
    S = round_schedule(adjusted, rounding_config, job_ids)
    t3 = time.perf_counter()
    timings.update(relax=t1 - t0, adjust=t2 - t1, round=t3 - t2)
    L = aggregate_load(instance, S)
    return RarResult(relaxation, adjusted, report, S, L, evaluate_cost(instance, L), timings)
