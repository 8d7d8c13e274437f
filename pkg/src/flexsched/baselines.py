"""Reference schedulers: exhaustive oracle, greedy placement, rounding without adjustment."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import BudgetExceeded, InvalidArgs
from .model import CostKind, Instance, aggregate_load, evaluate_cost, starts_to_schedule
from .relax import RelaxSolution, SolverConfig, solve_relaxation
from .rounding import RoundingConfig, round_schedule

DEFAULT_BUDGET = 10**7

_KIND_CODES = {
    CostKind.QUADRATIC_TRACKING: 0,
    CostKind.LINEAR: 1,
    CostKind.PIECEWISE_LINEAR: 2,
    CostKind.QUADRATIC_PURE: 3,
}


@dataclass(frozen=True)
class OracleResult:
    optimal_cost: float
    optimal_starts: np.ndarray
    nodes_explored: int

    def schedule(self, instance: Instance) -> np.ndarray:
        return starts_to_schedule(instance, self.optimal_starts)


class GreedyOrder(str, enum.Enum):
    BY_INDEX = "by_index"
    BY_ARRIVAL = "by_arrival"
    BY_SLACK = "by_slack"


def search_space(instance: Instance) -> int:
    """Number of start tuples, ``prod_j |admissible starts of j|``."""
    sizes = instance.last_start - instance.first_start + 1
    return math.prod(int(n) for n in sizes)


def _job_order(instance: Instance, order: GreedyOrder) -> list:
    jobs = range(instance.n_jobs)
    order = GreedyOrder(order)
    if order is GreedyOrder.BY_INDEX:
        return list(jobs)
    if order is GreedyOrder.BY_ARRIVAL:
        return sorted(jobs, key=lambda j: (instance.jobs[j].arrival, j))
    slack = instance.last_start - instance.first_start
    return sorted(jobs, key=lambda j: (int(slack[j]), j))


def greedy_starts(instance: Instance, order: GreedyOrder = GreedyOrder.BY_ARRIVAL) -> np.ndarray:
    """1-based starts from sequential cheapest-increment placement."""
    T = instance.horizon
    cost = instance.cost
    load = np.zeros(T)
    starts = np.zeros(instance.n_jobs, dtype=np.int64)
    for j in _job_order(instance, order):
        job = instance.jobs[j]
        best, best_t = math.inf, -1
        for t in range(int(instance.first_start[j]), int(instance.last_start[j]) + 1):
            step = np.zeros(T)
            step[t:t + job.duration] = job.shape
            inc = cost.difference(load, step)
            if inc < best:
                best, best_t = inc, t
        load[best_t:best_t + job.duration] += job.shape
        starts[j] = best_t + 1
    return starts


def greedy_schedule(instance: Instance, order: GreedyOrder = GreedyOrder.BY_ARRIVAL) -> np.ndarray:
    """Integral schedule placing jobs one at a time at the start that adds least cost.

    Ties go to the earliest start.
    """
    return starts_to_schedule(instance, greedy_starts(instance, order))


def brute_force_optimal(instance: Instance, budget: int = DEFAULT_BUDGET, kernels=None) -> OracleResult:
    """Exact integral optimum by depth-first branch and bound.

    Jobs with fewer admissible starts branch first. The incumbent starts
    from the greedy schedule; a node is pruned when the cheapest cost still
    reachable per slot, given the load placed so far and the most the
    remaining jobs can add, is no better than the incumbent. Raises
    BudgetExceeded when the number of start tuples exceeds ``budget``.
    """
    size = search_space(instance)
    if size > budget:
        raise BudgetExceeded(f"{size} start tuples exceed the budget of {budget}", size)
    cost = instance.cost
    if cost.kind not in _KIND_CODES:
        raise InvalidArgs(f"oracle does not support {cost.kind.value} costs")
    kernels = kernels or _kernels.kernels
    T = instance.horizon
    if instance.n_jobs == 0:
        return OracleResult(evaluate_cost(instance, np.zeros(T)), np.zeros(0, dtype=np.int64), 0)
    sizes = instance.last_start - instance.first_start + 1
    order = np.array(sorted(range(instance.n_jobs), key=lambda j: (int(sizes[j]), j)), dtype=np.int64)
    g = greedy_starts(instance, GreedyOrder.BY_ARRIVAL)
    incumbent = cost.total(aggregate_load(instance, starts_to_schedule(instance, g)))
    zeros = np.zeros(T)
    target = cost.target if cost.target is not None else zeros
    slope = cost.slope if cost.slope is not None else zeros
    if cost.pieces is not None:
        pa, pb = (np.ascontiguousarray(x) for x in cost.pieces)
    else:
        pa = pb = np.zeros((T, 1))
    c, starts, nodes = kernels.brute_force(
        order, np.ascontiguousarray(instance.shapes), np.ascontiguousarray(instance.durations),
        np.ascontiguousarray(instance.first_start), np.ascontiguousarray(instance.last_start), T,
        _KIND_CODES[cost.kind], np.ascontiguousarray(target, dtype=float),
        np.ascontiguousarray(slope, dtype=float), pa, pb,
        np.ascontiguousarray(cost.minimizers(T), dtype=float), incumbent, g - 1)
    starts = np.asarray(starts, dtype=np.int64) + 1
    # report the cost recomputed from the winning tuple
    L = aggregate_load(instance, starts_to_schedule(instance, starts))
    return OracleResult(cost.total(L), starts, int(nodes))


def relax_round_no_adjust(instance: Instance, solver_config: Optional[SolverConfig] = None,
                          rounding_config: Optional[RoundingConfig] = None,
                          relaxation: Optional[RelaxSolution] = None) -> np.ndarray:
    """Round the relaxed schedule directly, skipping adjustment."""
    if relaxation is None:
        relaxation = solve_relaxation(instance, solver_config)
    rounding_config = rounding_config or RoundingConfig()
    S = np.where(instance.admissible_mask, relaxation.schedule, 0.0)
    return round_schedule(S, rounding_config, [j.id for j in instance.jobs])
