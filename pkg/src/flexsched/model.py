"""Domain types and evaluation for non-preemptive load scheduling.

Time slots are 1-indexed in the public API (slot ``t`` in ``1..T``) and have a
fixed length of one hour, so energy per slot and average power share the same
numeric value. Schedules are ``(J, T)`` float arrays whose column ``t - 1``
holds the start-time weight ``s_j(t)``; load profiles and prices are length-T
float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainViolation,
    InvalidJob,
    InvalidStart,
)

#: Entries within this distance of 0 or 1 count as integral.
EPS_INT = 1e-9


class ShapeKind(str, Enum):
    RECTANGULAR = "rectangular"
    REALISTIC = "realistic"


class CostKind(str, Enum):
    QUADRATIC_TRACKING = "quadratic_tracking"
    LINEAR = "linear"
    PIECEWISE_LINEAR = "piecewise_linear"
    QUADRATIC_PURE = "quadratic_pure"
    EXPECTED_SHORTFALL = "expected_shortfall"


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Job:
    """One non-preemptive load.

    ``shape`` holds the per-slot power once started (length = duration).
    ``arrival`` and ``deadline`` are 1-indexed slots bounding the window in
    which the whole shape must fit.
    """

    id: int
    shape: np.ndarray
    arrival: int
    deadline: int
    kind: Optional[ShapeKind] = None

    def __post_init__(self):
        shape = _frozen(np.atleast_1d(self.shape))
        if shape.ndim != 1 or shape.size == 0:
            raise InvalidJob(f"job {self.id}: shape must be a non-empty vector")
        if not np.all(np.isfinite(shape)) or np.any(shape < 0):
            raise InvalidJob(f"job {self.id}: shape entries must be finite and >= 0")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "arrival", int(self.arrival))
        object.__setattr__(self, "deadline", int(self.deadline))
        flat = bool(np.all(shape == shape[0]))
        kind = self.kind
        if kind is None:
            kind = ShapeKind.RECTANGULAR if flat else ShapeKind.REALISTIC
        kind = ShapeKind(kind)
        if kind is ShapeKind.RECTANGULAR and not flat:
            raise InvalidJob(f"job {self.id}: rectangular job needs a constant shape")
        object.__setattr__(self, "kind", kind)
        if not (1 <= self.arrival and self.arrival + self.duration - 1 <= self.deadline):
            raise InvalidJob(
                f"job {self.id}: window [{self.arrival}, {self.deadline}] "
                f"cannot hold duration {self.duration}"
            )

    @classmethod
    def rectangular(cls, id, power, duration, arrival, deadline) -> "Job":
        return cls(id, np.full(int(duration), float(power)), arrival, deadline,
                   ShapeKind.RECTANGULAR)

    @property
    def duration(self) -> int:
        return int(self.shape.size)

    @property
    def window_length(self) -> int:
        return self.deadline + 1 - self.arrival

    @property
    def energy(self) -> float:
        return float(self.shape.sum())

    @property
    def power(self) -> float:
        """Peak power; equals the constant level for rectangular jobs."""
        return float(self.shape.max())

    @property
    def is_flat(self) -> bool:
        return bool(np.all(self.shape == self.shape[0]))

    def check_horizon(self, T: int) -> None:
        if self.deadline > T:
            raise InvalidJob(f"job {self.id}: deadline {self.deadline} beyond horizon {T}")


class PieceSet(NamedTuple):
    slopes: np.ndarray
    intercepts: np.ndarray


@dataclass(frozen=True, eq=False)
class CostModel:
    """Separable convex slot costs ``phi_t``.

    Use the named constructors; ``Instance`` binds per-slot parameters to the
    horizon (scalars broadcast) and fills a tracking target from the
    instance's renewable profile.
    """

    kind: CostKind
    target: Optional[np.ndarray] = None
    slope: Optional[np.ndarray] = None
    pieces: Optional[PieceSet] = None
    shortfall: Optional[object] = None
    lipschitz: Optional[float] = None

    @classmethod
    def quadratic_tracking(cls, target=None, lipschitz=None) -> "CostModel":
        return cls(CostKind.QUADRATIC_TRACKING,
                   target=None if target is None else _frozen(target),
                   lipschitz=lipschitz)

    @classmethod
    def quadratic_pure(cls, lipschitz=None) -> "CostModel":
        return cls(CostKind.QUADRATIC_PURE, lipschitz=lipschitz)

    @classmethod
    def linear(cls, slope, lipschitz=None) -> "CostModel":
        return cls(CostKind.LINEAR, slope=_frozen(np.atleast_1d(slope)), lipschitz=lipschitz)

    @classmethod
    def piecewise_linear(cls, slopes, intercepts, lipschitz=None) -> "CostModel":
        """``phi_t(x) = max_k slopes[t, k] * x + intercepts[t, k]``.

        1-D inputs are shared by every slot.
        """
        a = np.atleast_2d(np.asarray(slopes, dtype=float))
        b = np.atleast_2d(np.asarray(intercepts, dtype=float))
        if a.shape != b.shape:
            raise DimensionMismatch("piece slopes and intercepts differ in shape")
        return cls(CostKind.PIECEWISE_LINEAR, pieces=PieceSet(_frozen(a), _frozen(b)),
                   lipschitz=lipschitz)

    @classmethod
    def expected_shortfall(cls, model, lipschitz=None) -> "CostModel":
        """``phi_t(x) = E[(x - R_t)_+]`` for an i.i.d. renewable model.

        ``model`` must provide ``expected_shortfall(x)`` and ``cdf(x)`` in load
        units (see :class:`flexsched.stochastic.RenewableModel`).
        """
        return cls(CostKind.EXPECTED_SHORTFALL, shortfall=model, lipschitz=lipschitz)

    def bind(self, T: int, renewable: Optional[np.ndarray]) -> "CostModel":
        kw = {}
        if self.kind is CostKind.QUADRATIC_TRACKING:
            target = self.target
            if target is None:
                target = renewable if renewable is not None else np.zeros(T)
            target = np.broadcast_to(np.asarray(target, dtype=float), (T,))
            kw["target"] = _frozen(target)
        elif self.kind is CostKind.LINEAR:
            kw["slope"] = _frozen(np.broadcast_to(self.slope, (T,)))
        elif self.kind is CostKind.PIECEWISE_LINEAR:
            a, b = self.pieces
            K = a.shape[1]
            kw["pieces"] = PieceSet(_frozen(np.broadcast_to(a, (T, K))),
                                    _frozen(np.broadcast_to(b, (T, K))))
        return replace(self, **kw) if kw else self

    # evaluation -----------------------------------------------------------

    def slot_costs(self, load: np.ndarray) -> np.ndarray:
        x = np.asarray(load, dtype=float)
        k = self.kind
        if k is CostKind.QUADRATIC_TRACKING:
            return (x - self.target) ** 2
        if k is CostKind.QUADRATIC_PURE:
            return x ** 2
        if k is CostKind.LINEAR:
            return self.slope * x
        if k is CostKind.PIECEWISE_LINEAR:
            a, b = self.pieces
            return np.max(a * x[:, None] + b, axis=1)
        return self.shortfall.expected_shortfall(x)

    def total(self, load: np.ndarray) -> float:
        return float(np.sum(self.slot_costs(load)))

    def difference(self, load: np.ndarray, step: np.ndarray) -> float:
        """``cost(load + step) - cost(load)``, free of cancellation for the quadratic kinds."""
        k = self.kind
        if k is CostKind.QUADRATIC_TRACKING:
            return float(np.sum(step * (2.0 * (load - self.target) + step)))
        if k is CostKind.QUADRATIC_PURE:
            return float(np.sum(step * (2.0 * load + step)))
        if k is CostKind.LINEAR:
            return float(np.sum(self.slope * step))
        return float(np.sum(self.slot_costs(load + step) - self.slot_costs(load)))

    def curvature(self, step: np.ndarray) -> Optional[float]:
        """Second-order coefficient of the cost along ``step`` if the cost is at most quadratic.

        Then ``cost(L + u step) = cost(L) + u <grad, step> + u^2 curvature``; None otherwise.
        """
        k = self.kind
        if k in (CostKind.QUADRATIC_TRACKING, CostKind.QUADRATIC_PURE):
            return float(np.dot(step, step))
        if k is CostKind.LINEAR:
            return 0.0
        return None

    def smoothness(self) -> Optional[float]:
        """Upper bound on ``phi_t''``; None for piecewise-linear costs."""
        k = self.kind
        if k in (CostKind.QUADRATIC_TRACKING, CostKind.QUADRATIC_PURE):
            return 2.0
        if k is CostKind.LINEAR:
            return 0.0
        if k is CostKind.EXPECTED_SHORTFALL:
            return float(self.shortfall.max_density())
        return None

    def derivative(self, load: np.ndarray, kink_tol: float = 1e-12):
        """Return ``(slopes, kinks)``.

        At a kink of a piecewise-linear slot the midpoint of the subgradient
        interval is returned and the slot is flagged in ``kinks``.
        """
        x = np.asarray(load, dtype=float)
        k = self.kind
        kinks = np.zeros(x.shape, dtype=bool)
        if k is CostKind.QUADRATIC_TRACKING:
            return 2.0 * (x - self.target), kinks
        if k is CostKind.QUADRATIC_PURE:
            return 2.0 * x, kinks
        if k is CostKind.LINEAR:
            return np.array(self.slope, dtype=float), kinks
        if k is CostKind.PIECEWISE_LINEAR:
            a, b = self.pieces
            vals = a * x[:, None] + b
            top = vals.max(axis=1, keepdims=True)
            scale = np.maximum(1.0, np.abs(top))
            active = vals >= top - kink_tol * scale
            lo = np.where(active, a, np.inf).min(axis=1)
            hi = np.where(active, a, -np.inf).max(axis=1)
            kinks = hi > lo
            return 0.5 * (lo + hi), kinks
        return self.shortfall.cdf(x), kinks

    def minimizers(self, T: int) -> np.ndarray:
        """Per-slot unconstrained minimizer of ``phi_t`` (may be +-inf)."""
        k = self.kind
        if k is CostKind.QUADRATIC_TRACKING:
            return np.array(self.target, dtype=float)
        if k is CostKind.QUADRATIC_PURE:
            return np.zeros(T)
        if k is CostKind.LINEAR:
            c = np.asarray(self.slope, dtype=float)
            return np.where(c > 0, -np.inf, np.where(c < 0, np.inf, 0.0))
        if k is CostKind.PIECEWISE_LINEAR:
            return _pwl_minimizers(*self.pieces)
        return np.full(T, -np.inf)

    def lipschitz_bound(self, load_max: float) -> float:
        if self.lipschitz is not None:
            return float(self.lipschitz)
        k = self.kind
        if k is CostKind.QUADRATIC_TRACKING:
            rmax = float(np.max(np.abs(self.target))) if self.target.size else 0.0
            return 2.0 * (load_max + rmax)
        if k is CostKind.QUADRATIC_PURE:
            return 2.0 * load_max
        if k is CostKind.LINEAR:
            return float(np.max(np.abs(self.slope))) if self.slope.size else 0.0
        if k is CostKind.PIECEWISE_LINEAR:
            return float(np.max(np.abs(self.pieces.slopes)))
        return 1.0

    @property
    def differentiable(self) -> bool:
        return self.kind is not CostKind.PIECEWISE_LINEAR

    @property
    def smooth(self) -> bool:
        """True when the gradient is Lipschitz with a positive constant."""
        if self.kind is CostKind.EXPECTED_SHORTFALL:
            return bool(np.isfinite(self.smoothness()))
        return self.kind not in (CostKind.PIECEWISE_LINEAR, CostKind.LINEAR)


def _pwl_minimizers(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(a.shape[0])
    for t in range(a.shape[0]):
        at, bt = a[t], b[t]
        if np.all(at > 0):
            out[t] = -np.inf
            continue
        if np.all(at < 0):
            out[t] = np.inf
            continue
        # candidate points: pairwise intersections, plus 0 for flat pieces
        cands = [0.0]
        for i in range(at.size):
            for k in range(i + 1, at.size):
                if at[i] != at[k]:
                    cands.append((bt[k] - bt[i]) / (at[i] - at[k]))
        cands = np.array(cands)
        vals = np.max(at[None, :] * cands[:, None] + bt[None, :], axis=1)
        out[t] = cands[np.argmin(vals)]
    return out


@dataclass(frozen=True, eq=False)
class Instance:
    """Job population over a horizon with a cost model.

    ``renewable`` (optional, length T, kW) is the target profile tracked by
    quadratic-tracking costs.
    """

    horizon: int
    jobs: Sequence[Job]
    cost: CostModel = field(default_factory=CostModel.quadratic_pure)
    renewable: Optional[np.ndarray] = None

    def __post_init__(self):
        T = int(self.horizon)
        if T < 1:
            raise InvalidJob("horizon must be >= 1")
        object.__setattr__(self, "horizon", T)
        jobs = tuple(self.jobs)
        for job in jobs:
            job.check_horizon(T)
        object.__setattr__(self, "jobs", jobs)
        if self.renewable is not None:
            r = _frozen(self.renewable)
            if r.shape != (T,):
                raise DimensionMismatch(f"renewable has shape {r.shape}, expected ({T},)")
            if np.any(r < 0):
                raise InvalidJob("renewable entries must be >= 0")
            object.__setattr__(self, "renewable", r)
        object.__setattr__(self, "cost", self.cost.bind(T, self.renewable))

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    @cached_property
    def durations(self) -> np.ndarray:
        return _frozen([j.duration for j in self.jobs], dtype=np.int64)

    @cached_property
    def dmax(self) -> int:
        return int(self.durations.max()) if self.jobs else 0

    @cached_property
    def shapes(self) -> np.ndarray:
        """``(J, dmax)`` shape matrix padded with zeros."""
        out = np.zeros((self.n_jobs, max(self.dmax, 1)))
        for j, job in enumerate(self.jobs):
            out[j, : job.duration] = job.shape
        out.setflags(write=False)
        return out

    @cached_property
    def first_start(self) -> np.ndarray:
        """0-based earliest admissible start column per job."""
        return _frozen([j.arrival - 1 for j in self.jobs], dtype=np.int64)

    @cached_property
    def last_start(self) -> np.ndarray:
        """0-based latest admissible start column per job."""
        return _frozen([j.deadline - j.duration for j in self.jobs], dtype=np.int64)

    @cached_property
    def admissible_mask(self) -> np.ndarray:
        cols = np.arange(self.horizon)
        m = (cols[None, :] >= self.first_start[:, None]) & (cols[None, :] <= self.last_start[:, None])
        m.setflags(write=False)
        return m

    @cached_property
    def energies(self) -> np.ndarray:
        return _frozen(self.shapes.sum(axis=1))

    @cached_property
    def load_max(self) -> float:
        """Upper end of the cost domain: every job at peak power at once."""
        return float(self.shapes.max(axis=1).sum()) if self.jobs else 0.0

    @property
    def lipschitz(self) -> float:
        return self.cost.lipschitz_bound(self.load_max)

    @property
    def all_flat(self) -> bool:
        return all(j.is_flat for j in self.jobs)

    def with_cost(self, cost: CostModel, renewable=...) -> "Instance":
        if renewable is ...:
            renewable = self.renewable
        return Instance(self.horizon, self.jobs, cost, renewable)


# operations -----------------------------------------------------------------


def admissible_starts(job: Job, T: int) -> range:
    """1-indexed admissible start slots ``arrival .. deadline - d + 1``."""
    job.check_horizon(T)
    return range(job.arrival, job.deadline - job.duration + 2)


def profile_column(job: Job, start: int, T: int) -> np.ndarray:
    """Load profile of ``job`` when started in slot ``start``."""
    if start not in admissible_starts(job, T):
        raise InvalidStart(f"job {job.id}: start {start} not admissible")
    out = np.zeros(T)
    out[start - 1 : start - 1 + job.duration] = job.shape
    return out


def _check_schedule(instance: Instance, schedule) -> np.ndarray:
    S = np.asarray(schedule, dtype=float)
    if S.shape != (instance.n_jobs, instance.horizon):
        raise DimensionMismatch(
            f"schedule shape {S.shape} does not match ({instance.n_jobs}, {instance.horizon})"
        )
    return S


def load_from_shapes(shapes: np.ndarray, S: np.ndarray) -> np.ndarray:
    T = S.shape[1]
    L = np.zeros(T)
    for i in range(min(shapes.shape[1], T)):
        L[i:] += shapes[:, i] @ S[:, : T - i]
    return L


def aggregate_load(instance: Instance, schedule) -> np.ndarray:
    """Aggregate load ``L = sum_j P^(j) s_j`` without materialising ``P^(j)``."""
    S = _check_schedule(instance, schedule)
    if instance.n_jobs == 0:
        return np.zeros(instance.horizon)
    return load_from_shapes(instance.shapes, S)


def placement_costs(instance: Instance, prices: np.ndarray) -> np.ndarray:
    """Matrix ``start_cost[j, t-1]`` of price-weighted shape cost when job j starts at t.

    Entries for starts whose shape would run past the horizon only sum the
    in-horizon part; they are never admissible.
    """
    price = np.asarray(prices, dtype=float)
    T = price.size
    shapes = instance.shapes
    B = np.zeros((instance.n_jobs, T))
    for i in range(min(shapes.shape[1], T)):
        B[:, : T - i] += np.outer(shapes[:, i], price[i:])
    return B


def evaluate_cost(instance: Instance, load) -> float:
    """Total cost ``sum_t phi_t(L(t))``.

    Raises DomainViolation when a load leaves ``[0, load_max]``.
    """
    L = np.asarray(load, dtype=float)
    if L.shape != (instance.horizon,):
        raise DimensionMismatch(f"load has shape {L.shape}, expected ({instance.horizon},)")
    hi = instance.load_max
    slack = 1e-9 * max(1.0, hi)
    if np.any(L < -slack) or np.any(L > hi + slack) or not np.all(np.isfinite(L)):
        raise DomainViolation(f"load outside cost domain [0, {hi}]")
    return instance.cost.total(L)


class Violation(NamedTuple):
    kind: str  # "row_sum" | "support" | "box" | "binary"
    job: int
    slot: Optional[int]
    value: float


def check_feasibility(instance: Instance, schedule, integral: bool = False,
                      tol: float = 1e-9) -> list:
    """List every violated constraint; an empty list means feasible.

    Slots in the report are 1-indexed.
    """
    S = _check_schedule(instance, schedule)
    out = []
    sums = S.sum(axis=1)
    for j in np.flatnonzero(~(np.abs(sums - 1.0) <= tol)):
        out.append(Violation("row_sum", int(j), None, float(sums[j])))
    bad = (S != 0) & ~instance.admissible_mask
    for j, t in zip(*np.nonzero(bad)):
        out.append(Violation("support", int(j), int(t) + 1, float(S[j, t])))
    for j, t in zip(*np.nonzero(~((S >= -tol) & (S <= 1 + tol)))):
        out.append(Violation("box", int(j), int(t) + 1, float(S[j, t])))
    if integral:
        for j, t in zip(*np.nonzero((S != 0) & (S != 1))):
            out.append(Violation("binary", int(j), int(t) + 1, float(S[j, t])))
    return out


def fractional_mask(S: np.ndarray, eps: float = EPS_INT) -> np.ndarray:
    return (S > eps) & (S < 1.0 - eps)


def count_fractional(S: np.ndarray, eps: float = EPS_INT) -> int:
    return int(np.count_nonzero(fractional_mask(S, eps)))


def starts_to_schedule(instance: Instance, starts) -> np.ndarray:
    """Integral schedule from 1-indexed start slots."""
    S = np.zeros((instance.n_jobs, instance.horizon))
    S[np.arange(instance.n_jobs), np.asarray(starts, dtype=np.int64) - 1] = 1.0
    return S


def schedule_starts(S: np.ndarray) -> np.ndarray:
    """1-indexed start slots of an integral schedule."""
    return np.argmax(S, axis=1) + 1


def uniform_schedule(instance: Instance) -> np.ndarray:
    m = instance.admissible_mask.astype(float)
    if m.shape[0] == 0:
        return m
    return m / m.sum(axis=1, keepdims=True)


def rar_bound(instance: Instance) -> float:
    """Rounding-loss bound for rectangular jobs: ``2 dmax T K max_j p_j d_j``."""
    if not instance.jobs:
        return 0.0
    pd = max(j.power * j.duration for j in instance.jobs)
    return 2.0 * instance.dmax * instance.horizon * instance.lipschitz * pd


def rar_bound_realistic(instance: Instance) -> float:
    """Rounding-loss bound for general shapes: ``dmax T (T-1) K max_j ||p^(j)||_1``."""
    if not instance.jobs:
        return 0.0
    T = instance.horizon
    return instance.dmax * T * (T - 1) * instance.lipschitz * float(instance.energies.max())

