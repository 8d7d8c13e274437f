"""Marginal-price payments and the audits that back decentralised scheduling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch
from .model import EPS_INT, Instance, Job, placement_costs

PRICE_TOL_FLOOR = 1e-8


def start_prices(job: Job, prices) -> np.ndarray:
    """Price-weighted shape for every start column ``0..T-1`` (inf where the shape overruns)."""
    price = np.asarray(prices, dtype=float)
    T, d = price.size, job.duration
    out = np.full(T, np.inf)
    if d <= T:
        out[: T - d + 1] = np.convolve(price, job.shape[::-1], mode="valid")
    return out


def payment(job: Job, schedule_row, prices) -> float:
    """``sum_t prices(t) * load_j(t)`` for the load the row induces."""
    row = np.asarray(schedule_row, dtype=float)
    price = np.asarray(prices, dtype=float)
    if row.shape != price.shape:
        raise DimensionMismatch(f"row has shape {row.shape}, prices {price.shape}")
    start_cost = start_prices(job, price)
    used = row != 0
    if np.any(~np.isfinite(start_cost[used])):
        raise DimensionMismatch("row puts weight on a start that overruns the horizon")
    return float(np.dot(row[used], start_cost[used]))


def price_tolerance(instance: Instance, gap: float) -> float:
    """Solver gap divided by the smallest job energy, floored at :data:`PRICE_TOL_FLOOR`."""
    if not instance.jobs:
        return PRICE_TOL_FLOOR
    emin = float(instance.energies.min())
    if emin <= 0:
        return max(float(gap), PRICE_TOL_FLOOR)
    return max(float(gap) / emin, PRICE_TOL_FLOOR)


@dataclass
class PaymentLedger:
    relaxed: np.ndarray
    integral: np.ndarray
    best_alternative: np.ndarray
    residual: np.ndarray
    tolerance: np.ndarray
    support_violations: list = field(default_factory=list)

    @property
    def flagged(self) -> list:
        over = set(np.flatnonzero(self.residual > self.tolerance).tolist())
        return sorted(over | set(self.support_violations))

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def to_dict(self) -> dict:
        scale = float(np.max(np.abs(self.integral))) if self.integral.size else 0.0
        return {
            "max_residual": self.max_residual,
            "max_relative_residual": self.max_residual / scale if scale > 0 else 0.0,
            "flagged": self.flagged,
            "support_violations": list(self.support_violations),
            "total_payment": float(self.integral.sum()),
        }


def audit_payment_equivalence(instance: Instance, relaxed, integral, prices,
                              gap: float = 0.0, eps: float = EPS_INT) -> PaymentLedger:
    """Per-job payments under the fractional and the rounded schedules.

    A job is flagged when the two payments differ by more than the price
    tolerance times its energy (plus round-off), or when its rounded start
    carries no weight in the fractional schedule.
    """
    SR = np.asarray(relaxed, dtype=float)
    SI = np.asarray(integral, dtype=float)
    price = np.asarray(prices, dtype=float)
    if SR.shape != SI.shape or SR.shape != (instance.n_jobs, instance.horizon):
        raise DimensionMismatch("schedules do not match the instance")
    B = placement_costs(instance, price)
    mask = instance.admissible_mask
    B = np.where(mask, B, 0.0)
    pr = np.sum(SR * B, axis=1)
    pi = np.sum(SI * B, axis=1)
    best = np.where(mask, B, np.inf).min(axis=1) if instance.n_jobs else np.zeros(0)
    residual = np.abs(pr - pi)
    ptol = price_tolerance(instance, gap)
    roundoff = 1e-12 * max(1.0, float(np.max(np.abs(pi))) if pi.size else 1.0)
    tol = ptol * instance.energies + roundoff
    bad = np.flatnonzero(np.any((SI > eps) & (SR <= eps), axis=1)).tolist()
    return PaymentLedger(pr, pi, best, residual, tol, bad)


@dataclass
class SelfSchedulingReport:
    tolerance: float
    margins: np.ndarray
    violations: list
    ties: list

    @property
    def worst_margin(self) -> float:
        return float(self.margins.max()) if self.margins.size else 0.0

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "worst_margin": self.worst_margin,
                "violations": list(self.violations), "ties": len(self.ties)}


def audit_self_scheduling(instance: Instance, integral, prices, gap: float = 0.0,
                          tolerance: Optional[float] = None) -> SelfSchedulingReport:
    """Check that no job pays more than at its cheapest admissible start.

    ``margins[j]`` is the job's payment minus its cheapest alternative, so
    it is never negative. A job violates when the margin exceeds the price
    tolerance times its energy; another start at an equal payment is only
    listed in ``ties`` as ``(job, slot)`` with 1-based slots.
    """
    SI = np.asarray(integral, dtype=float)
    price = np.asarray(prices, dtype=float)
    if SI.shape != (instance.n_jobs, instance.horizon):
        raise DimensionMismatch("schedule does not match the instance")
    ptol = price_tolerance(instance, gap) if tolerance is None else float(tolerance)
    B = np.where(instance.admissible_mask, placement_costs(instance, price), np.inf)
    own = np.sum(np.where(SI > 0, SI * np.where(np.isfinite(B), B, 0.0), 0.0), axis=1)
    cheapest = B.min(axis=1) if instance.n_jobs else np.zeros(0)
    margins = np.maximum(own - cheapest, 0.0)
    roundoff = 1e-12 * max(1.0, float(np.max(np.abs(own))) if own.size else 1.0)
    limit = ptol * instance.energies + roundoff
    violations = np.flatnonzero(margins > limit).tolist()
    ties = []
    chosen = np.argmax(SI, axis=1) if instance.n_jobs else np.zeros(0, dtype=int)
    for j in range(instance.n_jobs):
        alt = np.flatnonzero(np.abs(B[j] - own[j]) <= limit[j])
        ties.extend((j, int(t) + 1) for t in alt if t != chosen[j])
    return SelfSchedulingReport(ptol, margins, violations, ties)
