"""Lossless adjustment: fewer fractional entries, identical aggregate load.

Rectangular populations use cycle cancellation on per-duration multigraphs;
arbitrary shapes use null-space shifts between pairs of slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._pykernels import DurationMultigraph, find_cycle, null_vector
from .errors import InfeasibleInput, NotRectangular
from .model import EPS_INT, Instance, aggregate_load, check_feasibility, count_fractional

__all__ = [
    "AdjustReport",
    "DurationMultigraph",
    "PairUpdate",
    "adjust",
    "adjust_realistic",
    "adjust_rectangular",
    "find_cycle",
    "graph_for_duration",
    "null_vector",
]


@dataclass(frozen=True)
class PairUpdate:
    """One null-space shift. Slots are 1-based; ``jobs`` are row indices."""

    slots: tuple
    jobs: tuple
    direction: np.ndarray
    shift: float

    @property
    def direction_leading(self) -> np.ndarray:
        """``direction`` rescaled so its first non-zero entry is 1."""
        lead = self.direction[np.flatnonzero(self.direction)[0]]
        return self.direction / lead

    @property
    def shift_leading(self) -> float:
        """Step length matching :attr:`direction_leading`."""
        return self.shift * float(self.direction[np.flatnonzero(self.direction)[0]])


@dataclass
class AdjustReport:
    algorithm: str
    fractional_before: int
    fractional_after: int
    iterations: int
    max_load_deviation: float
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "fractional_before": self.fractional_before,
            "fractional_after": self.fractional_after,
            "iterations": self.iterations,
            "max_load_deviation": self.max_load_deviation,
        }


def _prepare(instance: Instance, schedule, eps: float):
    S0 = np.asarray(schedule, dtype=float)
    bad = check_feasibility(instance, S0, tol=1e-6)
    if bad:
        v = bad[0]
        raise InfeasibleInput(f"{len(bad)} violations, first: {v.kind} at job {v.job} slot {v.slot}")
    # entries within eps of 0 or 1 count as integral but keep their value,
    # so the aggregate load is untouched
    S = np.array(S0, dtype=float, order="C", copy=True)
    S[~instance.admissible_mask] = 0.0
    return S0, S


def graph_for_duration(instance: Instance, schedule, duration: int,
                       eps: float = EPS_INT) -> DurationMultigraph:
    """Multigraph of the fractional jobs with the given duration (0-based slots)."""
    S = np.asarray(schedule, dtype=float)
    rows = np.flatnonzero(instance.durations == duration)
    return DurationMultigraph.from_schedule(S, rows, eps, duration)


def adjust_rectangular(instance: Instance, schedule, eps: float = EPS_INT,
                       max_iter: Optional[int] = None, kernels=None):
    """Cycle cancellation for constant-power jobs, durations in ascending order.

    ``max_iter`` caps the total number of cancellations. Returns
    ``(adjusted, report)``; the input is not modified.
    """
    if not instance.all_flat:
        raise NotRectangular("cycle cancellation needs constant-power jobs")
    kernels = kernels or _kernels.kernels
    S0, S = _prepare(instance, schedule, eps)
    before = count_fractional(S0, eps)
    power = np.ascontiguousarray(instance.shapes[:, 0]) if instance.n_jobs else np.zeros(0)
    durations = instance.durations
    budget = -1 if max_iter is None else int(max_iter)
    n = 0
    for d in np.unique(durations):
        if 0 <= budget <= n:
            break
        rows = np.ascontiguousarray(np.flatnonzero(durations == d), dtype=np.int64)
        left = -1 if budget < 0 else budget - n
        n += int(kernels.rect_adjust(S, rows, power, eps, left))
    dev = _deviation(instance, S0, S)
    return S, AdjustReport("rectangular", before, count_fractional(S, eps), n, dev)


def adjust_realistic(instance: Instance, schedule, eps: float = EPS_INT,
                     max_iter: Optional[int] = None, trace: bool = False, kernels=None):
    """Null-space pair shifts for arbitrary shapes.

    With ``trace=True`` the report lists a :class:`PairUpdate` per shift.
    """
    kernels = kernels or _kernels.kernels
    S0, S = _prepare(instance, schedule, eps)
    before = count_fractional(S0, eps)
    log = [] if trace else None
    shapes = np.ascontiguousarray(instance.shapes)
    n = 0
    if instance.n_jobs:
        n = int(kernels.realistic_adjust(S, shapes, eps, -1 if max_iter is None else int(max_iter), log))
    steps = [PairUpdate((t + 1, u + 1), tuple(int(j) for j in jobs), np.asarray(direction), float(dl))
             for t, u, jobs, direction, dl in (log or [])]
    dev = _deviation(instance, S0, S)
    return S, AdjustReport("realistic", before, count_fractional(S, eps), n, dev, steps)


def adjust(instance: Instance, schedule, eps: float = EPS_INT, kernels=None):
    """Cycle cancellation when every job is flat, null-space shifts otherwise."""
    if instance.all_flat:
        return adjust_rectangular(instance, schedule, eps, kernels=kernels)
    return adjust_realistic(instance, schedule, eps, kernels=kernels)


def _deviation(instance: Instance, before, after) -> float:
    if instance.n_jobs == 0:
        return 0.0
    return float(np.max(np.abs(aggregate_load(instance, after) - aggregate_load(instance, before))))
