"""Scheduling against uncertain renewable supply.

The cost of a load profile is the expected shortfall ``E[sum_t (L(t) - R(t))_+]``
with ``R(t)`` i.i.d. across slots. Two ways to schedule against it:

* :func:`modified_rar` runs the ordinary pipeline on the surrogate
  ``sum_t L(t)^2``, which needs neither samples nor the distribution.
* :func:`baseline_saa_rar` replaces the expectation by a sample average
  over a fixed draw and solves that linear program before adjusting and
  rounding.

:func:`monte_carlo_cost` evaluates either schedule on fresh samples.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import ndtr
from scipy.stats import truncnorm

from ._rng import substream
from .errors import InvalidArgs, NotConverged
from .generators import SyntheticConfig, generate_synthetic
from .model import CostModel, Instance, aggregate_load
from .pipeline import RarResult, rar
from .relax import Method, RelaxSolution, SolverConfig, solve_relaxation
from .rounding import RoundingConfig

#: Samples per independently seeded block; block ``b`` covers samples ``b*CHUNK ..``.
CHUNK = 1024


class RenewableKind(str, enum.Enum):
    TRUNCATED_GAUSSIAN_IID = "truncated_gaussian_iid"


@dataclass(frozen=True)
class RenewableModel:
    """I.i.d. truncated normal supply per slot.

    ``mean``, ``std`` and the support ``[lo, hi]`` are in MW; ``scale``
    converts to load units (default kW per MW). ``dispersion="variance"``
    reads ``std`` as a variance instead.
    """

    mean: float = 0.66
    std: float = 0.11
    lo: float = 0.0
    hi: float = 2.76
    scale: float = 1000.0
    dispersion: str = "std"
    seed: int = 0
    kind: RenewableKind = RenewableKind.TRUNCATED_GAUSSIAN_IID

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise InvalidArgs(f"empty support [{self.lo}, {self.hi}]")
        if self.std < 0 or self.scale <= 0:
            raise InvalidArgs("std must be >= 0 and scale > 0")
        if self.dispersion not in ("std", "variance"):
            raise InvalidArgs(f"unknown dispersion {self.dispersion!r}")
        if self.std_dev == 0 and not self.lo <= self.mean <= self.hi:
            raise InvalidArgs("point mass outside the support")

    @property
    def std_dev(self) -> float:
        return math.sqrt(self.std) if self.dispersion == "variance" else float(self.std)

    @property
    def degenerate(self) -> bool:
        return self.std_dev == 0.0 or self.lo == self.hi

    def scaled(self, factor: float) -> "RenewableModel":
        return replace(self, scale=self.scale * factor)

    def _dist(self):
        s = self.std_dev
        return truncnorm((self.lo - self.mean) / s, (self.hi - self.mean) / s, loc=self.mean, scale=s)

    def _point(self) -> float:
        return self.lo if self.lo == self.hi else self.mean

    # distribution in load units ------------------------------------------------

    def cdf(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) / self.scale
        if self.degenerate:
            return (y >= self._point()).astype(float)
        return self._dist().cdf(y)

    def pdf(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) / self.scale
        if self.degenerate:
            return np.where(y == self._point(), np.inf, 0.0)
        return self._dist().pdf(y) / self.scale

    def max_density(self) -> float:
        if self.degenerate:
            return math.inf
        mode = min(max(self.mean, self.lo), self.hi)
        return float(self._dist().pdf(mode)) / self.scale

    def mean_supply(self) -> float:
        if self.degenerate:
            return self._point() * self.scale
        return float(self._dist().mean()) * self.scale

    def expected_shortfall(self, x) -> np.ndarray:
        """``E[(x - R)_+]`` elementwise, via the truncated-normal partial expectation."""
        y = np.asarray(x, dtype=float) / self.scale
        if self.degenerate:
            return np.maximum(y - self._point(), 0.0) * self.scale
        s, m = self.std_dev, self.mean
        a, b = (self.lo - m) / s, (self.hi - m) / s
        z = np.clip((y - m) / s, a, b)
        mass = ndtr(b) - ndtr(a)
        density = lambda u: np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)  # noqa: E731
        cdf = (ndtr(z) - ndtr(a)) / mass
        partial = (m * (ndtr(z) - ndtr(a)) - s * (density(z) - density(a))) / mass
        out = y * cdf - partial
        out = np.where(y <= self.lo, 0.0, out)
        out = np.where(y >= self.hi, y - self.mean_supply() / self.scale, out)
        return np.maximum(out, 0.0) * self.scale

    def sample(self, n: int, T: int, seed: Optional[int] = None) -> np.ndarray:
        """``(n, T)`` draws in load units by inverse CDF.

        Block ``b`` of :data:`CHUNK` rows comes from its own sub-stream, so a
        prefix of a larger draw equals the smaller draw.
        """
        seed = self.seed if seed is None else seed
        out = np.empty((n, T))
        for b, start in enumerate(range(0, n, CHUNK)):
            rows = min(CHUNK, n - start)
            u = substream(seed, "renewable", b).random((rows, T))
            if self.degenerate:
                out[start:start + rows] = self._point()
            else:
                out[start:start + rows] = np.clip(self._dist().ppf(u), self.lo, self.hi)
        return out * self.scale

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "mean": self.mean, "std": self.std, "lo": self.lo,
                "hi": self.hi, "scale": self.scale, "dispersion": self.dispersion,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RenewableModel":
        d = dict(d)
        d["kind"] = RenewableKind(d.get("kind", RenewableKind.TRUNCATED_GAUSSIAN_IID.value))
        return cls(**d)


class StochasticKind(str, enum.Enum):
    EXPECTED_SHORTFALL = "expected_shortfall"
    USER_SAMPLER = "user_sampler"


@dataclass(frozen=True)
class StochasticCost:
    """Expected shortfall against a renewable model or a user sampler.

    A sampler is called as ``sampler(n, T, seed)`` and returns ``(n, T)``
    supply draws in load units.
    """

    renewable: Optional[RenewableModel] = None
    sampler: Optional[Callable] = None

    def __post_init__(self):
        if (self.renewable is None) == (self.sampler is None):
            raise InvalidArgs("give exactly one of renewable and sampler")

    @property
    def kind(self) -> StochasticKind:
        return StochasticKind.USER_SAMPLER if self.sampler else StochasticKind.EXPECTED_SHORTFALL

    def sample(self, n: int, T: int, seed: int) -> np.ndarray:
        if self.sampler is not None:
            return np.asarray(self.sampler(n, T, seed), dtype=float)
        return self.renewable.sample(n, T, seed)

    @staticmethod
    def sample_cost(load, draws) -> np.ndarray:
        """Shortfall of ``load`` under each row of ``draws``."""
        return np.maximum(np.asarray(load, dtype=float)[None, :] - draws, 0.0).sum(axis=1)

    def cost_model(self) -> CostModel:
        """Exact expected shortfall; needs a renewable model."""
        if self.renewable is None:
            raise InvalidArgs("a user sampler has no closed-form expectation")
        return CostModel.expected_shortfall(self.renewable, lipschitz=1.0)

    @staticmethod
    def saa_cost_model(draws) -> CostModel:
        """Sample-average shortfall as a piecewise-linear cost, ``n + 1`` pieces per slot.

        Piece ``k`` has slope ``k / n`` and passes the ``k`` smallest draws.
        """
        R = np.sort(np.asarray(draws, dtype=float), axis=0).T
        T, n = R.shape
        slopes = np.broadcast_to(np.arange(n + 1) / n, (T, n + 1))
        intercepts = np.hstack([np.zeros((T, 1)), -np.cumsum(R, axis=1) / n])
        return CostModel.piecewise_linear(slopes, intercepts, lipschitz=1.0)


def monte_carlo_cost(load, cost: StochasticCost, n_samples: int, seed: int = 0):
    """Sample mean and its standard error of the total shortfall."""
    if n_samples < 1:
        raise InvalidArgs("n_samples must be >= 1")
    L = np.asarray(load, dtype=float)
    vals = StochasticCost.sample_cost(L, cost.sample(n_samples, L.size, seed))
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return float(vals.mean()), se


# schedulers ------------------------------------------------------------------------


def modified_rar(instance: Instance, solver_config: Optional[SolverConfig] = None,
                 rounding_config: Optional[RoundingConfig] = None, kernels=None) -> RarResult:
    """Pipeline on the surrogate ``sum_t L(t)^2``; the result's cost is the surrogate's."""
    surrogate = instance.with_cost(CostModel.quadratic_pure(), renewable=None)
    return rar(surrogate, solver_config, rounding_config, kernels=kernels)


def solve_saa_lp(instance: Instance, cost: CostModel) -> RelaxSolution:
    """Exact relaxation for a piecewise-linear cost, as a linear program.

    Variables are the admissible start weights, the slot loads and one
    epigraph value per slot.
    """
    J, T = instance.n_jobs, instance.horizon
    a, b = cost.pieces
    K = a.shape[1]
    jj, tt = np.nonzero(instance.admissible_mask)
    nv = jj.size
    shapes = instance.shapes
    # L_t - sum_j shape contributions = 0
    rows, cols, vals = [], [], []
    for i in range(shapes.shape[1]):
        p = shapes[jj, i]
        keep = (tt + i < T) & (p != 0)
        rows.append(tt[keep] + i)
        cols.append(np.flatnonzero(keep))
        vals.append(-p[keep])
    rows.append(np.arange(T))
    cols.append(nv + np.arange(T))
    vals.append(np.ones(T))
    load_eq = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(T, nv + 2 * T))
    row_eq = sparse.csr_matrix((np.ones(nv), (jj, np.arange(nv))), shape=(J, nv + 2 * T))
    # a_tk L_t - z_t <= -b_tk
    r = np.repeat(np.arange(T * K), 2)
    c = np.column_stack([nv + np.repeat(np.arange(T), K), nv + T + np.repeat(np.arange(T), K)]).ravel()
    v = np.column_stack([a.ravel(), -np.ones(T * K)]).ravel()
    A_ub = sparse.csr_matrix((v, (r, c)), shape=(T * K, nv + 2 * T))
    obj = np.concatenate([np.zeros(nv + T), np.ones(T)])
    bounds = [(0.0, 1.0)] * nv + [(None, None)] * (2 * T)
    res = linprog(obj, A_ub=A_ub, b_ub=-b.ravel(), A_eq=sparse.vstack([load_eq, row_eq]),
                  b_eq=np.concatenate([np.zeros(T), np.ones(J)]), bounds=bounds, method="highs")
    if res.status != 0:
        raise NotConverged(f"linear program failed: {res.message}")
    S = np.zeros((J, T))
    S[jj, tt] = np.clip(res.x[:nv], 0.0, 1.0)
    if J:
        S /= S.sum(axis=1, keepdims=True)
    L = aggregate_load(instance, S)
    price, kinks = cost.derivative(L)
    return RelaxSolution(S, L, price, 0.0, int(res.nit), cost.total(L), kinks)


def baseline_saa_rar(instance: Instance, cost: StochasticCost, n_samples: Optional[int],
                     seed: int = 0, rounding_config: Optional[RoundingConfig] = None,
                     solver_config: Optional[SolverConfig] = None, method: str = "lp",
                     kernels=None) -> RarResult:
    """Pipeline on the sample-average shortfall over one fixed draw of ``n_samples``.

    ``n_samples=None`` uses the exact expectation instead (projected gradient
    on the smooth expected-shortfall cost). ``method="cg"`` solves the sample
    average with conditional gradient and keeps its best iterate if the gap
    target is missed. The result's cost is the sample-average objective.
    """
    rounding_config = rounding_config or RoundingConfig(seed=seed)
    if n_samples is None:
        inst = instance.with_cost(cost.cost_model(), renewable=None)
        try:
            sol = solve_relaxation(inst, solver_config)
        except NotConverged as exc:
            sol = exc.best
        return rar(inst, relaxation=sol, rounding_config=rounding_config, kernels=kernels)
    draws = cost.sample(int(n_samples), instance.horizon, seed)
    inst = instance.with_cost(StochasticCost.saa_cost_model(draws), renewable=None)
    if method == "lp":
        sol = solve_saa_lp(inst, inst.cost)
    elif method == "cg":
        cfg = replace(solver_config or SolverConfig(max_iterations=2000),
                      method=Method.CONDITIONAL_GRADIENT)
        try:
            sol = solve_relaxation(inst, cfg)
        except NotConverged as exc:
            sol = exc.best
    else:
        raise InvalidArgs(f"unknown method {method!r}")
    return rar(inst, relaxation=sol, rounding_config=rounding_config, kernels=kernels)


# experiment ---------------------------------------------------------------------------


def shortfall_instance(J: int = 60, T: int = 24, seed: int = 0, max_duration: int = 1,
                       model: Optional[RenewableModel] = None) -> Instance:
    """Synthetic EV population with supply scaled to ``J`` from a 3000-job fleet."""
    model = model or RenewableModel()
    cfg = SyntheticConfig(J=J, T=T, duration_range=(1, max_duration), cost="quadratic_pure")
    base = generate_synthetic(cfg, seed)
    return base.with_cost(CostModel.expected_shortfall(model.scaled(J / 3000.0), lipschitz=1.0),
                          renewable=None)


def stochastic_experiment(instance: Instance, n_values=(25, 100, 500), repeats: int = 20,
                          eval_samples: int = 20000, seed: int = 0) -> dict:
    """Evaluate both schedulers on one instance with common evaluation draws.

    Each repeat reseeds the rounding (both arms) and the sample set (baseline
    arm). Returns per-arm lists of evaluated expected costs.
    """
    cost = StochasticCost(instance.cost.shortfall)
    draws = cost.sample(eval_samples, instance.horizon, substream(seed, "evaluate").integers(2**31))

    def evaluate(load):
        return float(StochasticCost.sample_cost(load, draws).mean())

    gen = substream(seed, "repeats")
    rounding = [RoundingConfig(seed=int(x)) for x in gen.integers(2**31, size=repeats)]
    sample_seeds = [int(x) for x in gen.integers(2**31, size=repeats)]
    surrogate = instance.with_cost(CostModel.quadratic_pure(), renewable=None)
    relaxed = solve_relaxation(surrogate)
    out = {"modified": [evaluate(rar(surrogate, relaxation=relaxed, rounding_config=rc).load)
                        for rc in rounding],
           "saa": {}}
    for n in n_values:
        out["saa"][int(n)] = [
            evaluate(baseline_saa_rar(instance, cost, n, seed=ss, rounding_config=rc).load)
            for ss, rc in zip(sample_seeds, rounding)
        ]
    return out
