"""Convex relaxation of the start-time problem with a certified optimality gap.

The binary start indicators are relaxed to weights on each job's simplex of
admissible starts. Smooth costs are minimised by accelerated projected
gradient with exact simplex projection; a step is kept only if it lowers the
cost, otherwise the momentum restarts. Linear and piecewise-linear costs use
conditional gradient with step ``2 / (k + 2)``.

The certificate of a point ``x`` with gradient ``g`` is ``<g, x - v>`` where
``v`` puts each job on its cheapest start. By convexity it bounds
``cost(x) - min cost`` from above, and it also bounds how much weight can sit
on starts that are dearer than a job's cheapest one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptySupport, NonDifferentiable, NotConverged
from .model import (EPS_INT, Instance, aggregate_load, load_from_shapes, placement_costs,
                    uniform_schedule)


class Method(str, enum.Enum):
    PROJECTED_GRADIENT = "projected_gradient"
    CONDITIONAL_GRADIENT = "conditional_gradient"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``gap_tolerance`` is relative to ``max(1, cost(L0))`` at the uniform start
    unless ``relative`` is false. ``method=None`` picks projected gradient
    for costs with a Lipschitz gradient and conditional gradient otherwise.
    """

    max_iterations: int = 50000
    gap_tolerance: float = 1e-7
    relative: bool = True
    method: Optional[Method] = None
    step_relax: float = 0.9
    step_max: float = 1e16
    record_history: bool = False

    def __post_init__(self):
        if not self.gap_tolerance > 0:
            raise ValueError("gap_tolerance must be > 0")


@dataclass
class RelaxSolution:
    schedule: np.ndarray
    load: np.ndarray
    prices: np.ndarray
    gap_certificate: float
    iterations: int
    objective: float
    kinks: np.ndarray = field(default=None)
    history: list = field(default_factory=list)

    def to_dict(self, eps: float = EPS_INT) -> dict:
        """JSON form; the schedule is stored as ``(row, slot, value)`` triplets, slots 1-based."""
        rows, cols = np.nonzero(self.schedule > eps)
        return {
            "shape": list(self.schedule.shape),
            "schedule": [[int(j), int(t) + 1, float(self.schedule[j, t])] for j, t in zip(rows, cols)],
            "load": self.load.tolist(),
            "prices": self.prices.tolist(),
            "gap_certificate": float(self.gap_certificate),
            "iterations": int(self.iterations),
            "objective": float(self.objective),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelaxSolution":
        S = np.zeros(tuple(d["shape"]))
        for j, t, v in d["schedule"]:
            S[int(j), int(t) - 1] = v
        prices = np.asarray(d["prices"], dtype=float)
        return cls(S, np.asarray(d["load"], dtype=float), prices, d["gap_certificate"],
                   d["iterations"], d["objective"], np.zeros(prices.shape, dtype=bool))


# projections -------------------------------------------------------------------


def simplex_project(weights, support) -> np.ndarray:
    """Euclidean projection of ``weights`` onto the probability simplex over ``support``.

    ``support`` holds positions in ``weights``; the other entries of the result are 0.
    """
    y = np.asarray(weights, dtype=float)
    idx = np.unique(np.asarray(list(support), dtype=np.int64))
    if idx.size == 0:
        raise EmptySupport("support is empty")
    mask = np.zeros((1, y.size), dtype=bool)
    mask[0, idx] = True
    return project_rows(y[None, :], mask)[0]


def project_rows(Y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection restricted to ``mask``; every row needs a True entry."""
    Z = np.where(mask, Y, -np.inf)
    U = -np.sort(-Z, axis=1)
    fin = np.isfinite(U)
    css = np.cumsum(np.where(fin, U, 0.0), axis=1)
    k = np.arange(1, Y.shape[1] + 1)
    cond = fin & (U * k > css - 1.0)
    last = cond.sum(axis=1) - 1
    offset = (css[np.arange(Y.shape[0]), last] - 1.0) / (last + 1)
    X = np.maximum(Z - offset[:, None], 0.0)
    X[~mask] = 0.0
    return X


# prices --------------------------------------------------------------------------


def marginal_prices(instance: Instance, load) -> np.ndarray:
    """Slot-cost derivatives at ``load``.

    Raises NonDifferentiable at a kink of a piecewise-linear slot; the error
    carries the subgradient-interval midpoints and the kink flags.
    """
    price, kinks = instance.cost.derivative(np.asarray(load, dtype=float))
    if np.any(kinks):
        raise NonDifferentiable(f"cost not differentiable at slots {np.flatnonzero(kinks) + 1}",
                                price, kinks)
    return price


# solver ----------------------------------------------------------------------------


def _lmo(start_cost: np.ndarray, mask: np.ndarray):
    """Cheapest admissible start per job (ties to the earliest) and its cost."""
    masked = np.where(mask, start_cost, np.inf)
    idx = np.argmin(masked, axis=1)
    return idx, masked[np.arange(start_cost.shape[0]), idx]


class _State:
    __slots__ = ("S", "L", "f", "price", "start_cost", "gap")


def operator_norm_sq(instance: Instance, iterations: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``S -> L`` composed with its adjoint."""
    mask = instance.admissible_mask
    rng = np.random.default_rng(seed)
    V = np.where(mask, rng.random(mask.shape), 0.0)
    est = 0.0
    for _ in range(iterations):
        nv = np.linalg.norm(V)
        if nv == 0:
            return 0.0
        V /= nv
        W = np.where(mask, placement_costs(instance, load_from_shapes(instance.shapes, V)), 0.0)
        est = float(np.sum(V * W))
        V = W
    return est


def solve_relaxation(instance: Instance, config: Optional[SolverConfig] = None) -> RelaxSolution:
    """Minimise the relaxed cost to the configured gap.

    Raises NotConverged with the best iterate when the iteration budget runs out.
    """
    config = config or SolverConfig()
    J, T = instance.n_jobs, instance.horizon
    cost = instance.cost
    if J == 0:
        L = np.zeros(T)
        price, kinks = cost.derivative(L)
        return RelaxSolution(np.zeros((0, T)), L, price, 0.0, 0, cost.total(L), kinks)
    method = config.method
    if method is None:
        method = Method.PROJECTED_GRADIENT if cost.smooth else Method.CONDITIONAL_GRADIENT
    method = Method(method)
    mask = instance.admissible_mask
    shapes = instance.shapes

    def gradient(L):
        price, _ = cost.derivative(L)
        start_cost = placement_costs(instance, price)
        _, mins = _lmo(start_cost, mask)
        # per-row shifts leave projections and directional slopes unchanged
        return start_cost - mins[:, None]

    def state(S, L=None):
        st = _State()
        st.S = S
        st.L = aggregate_load(instance, S) if L is None else L
        st.f = cost.total(st.L)
        st.start_cost = gradient(st.L)
        st.gap = max(0.0, float(np.sum(st.start_cost * S)))
        return st

    def change(L, dL, slope):
        curv = cost.curvature(dL)
        if curv is not None:
            return slope + curv
        return cost.difference(L, dL)

    cur = state(uniform_schedule(instance))
    tol = config.gap_tolerance * (max(1.0, abs(cur.f)) if config.relative else 1.0)
    best = cur
    it = 0
    history = [cur.f] if config.record_history else None
    if method is Method.PROJECTED_GRADIENT:
        smooth = cost.smoothness()
        lip = 1.05 * (smooth if smooth else 2.0) * operator_norm_sq(instance)
        lip = max(lip, 1e-12)
        Y, LY, momentum = cur.S, cur.L, 1.0
        while best.gap > tol and it < config.max_iterations:
            it += 1
            GY = cur.start_cost if Y is cur.S else gradient(LY)
            lip *= config.step_relax
            while True:
                Sn = project_rows(Y - GY / lip, mask)
                dY = Sn - Y
                dLY = load_from_shapes(shapes, dY)
                curv = cost.curvature(dLY)
                if curv is None:
                    curv = cost.difference(LY, dLY) - float(np.sum(GY * dY))
                # sufficient decrease model at Y
                if curv <= 0.5 * lip * float(np.sum(dY * dY)) * (1.0 + 1e-12) or lip > config.step_max:
                    break
                lip *= 2.0
            d = Sn - cur.S
            dL = load_from_shapes(shapes, d)
            df = change(cur.L, dL, float(np.sum(cur.start_cost * d))) if np.any(d) else 0.0
            if df > 0 or not np.any(d):
                if Y is cur.S:
                    break
                # restart the momentum, keeping the iterate
                Y, LY, momentum = cur.S, cur.L, 1.0
                continue
            nxt = (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
            w = (momentum - 1.0) / nxt
            momentum = nxt
            cur = state(Sn, cur.L + dL)
            if history is not None:
                history.append(cur.f)
            Y = cur.S + w * d
            LY = cur.L + w * dL
            if w == 0.0:
                Y = cur.S
            if cur.gap <= best.gap:
                best = cur
    else:
        S = cur.S
        rows = np.arange(J)
        while best.gap > tol and it < config.max_iterations:
            idx, _ = _lmo(cur.start_cost, mask)
            V = np.zeros_like(S)
            V[rows, idx] = 1.0
            gamma = 2.0 / (it + 2.0)
            it += 1
            S = (1.0 - gamma) * cur.S + gamma * V
            cur = state(S)
            if history is not None:
                history.append(cur.f)
            if cur.gap < best.gap:
                best = cur

    L = aggregate_load(instance, best.S)
    gap = best.gap
    price, kinks = cost.derivative(L)
    sol = RelaxSolution(best.S, L, price, gap, it, cost.total(L), kinks, history or [])
    if gap > tol:
        raise NotConverged(f"gap {gap:.3e} above tolerance {tol:.3e} after {it} iterations",
                           sol, gap)
    return sol
