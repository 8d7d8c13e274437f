"""Experiment driver behind the CLI: single runs, sweeps and the verification battery."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ._rng import substream
from .adjust import adjust
from .baselines import DEFAULT_BUDGET, brute_force_optimal, greedy_schedule, relax_round_no_adjust
from .errors import BudgetExceeded, FlexSchedError, NotConverged
from .generators import SyntheticConfig, generate_synthetic
from .model import (CostKind, CostModel, Instance, ShapeKind, aggregate_load, check_feasibility,
                    count_fractional, evaluate_cost, rar_bound, rar_bound_realistic)
from .pipeline import rar
from .pricing import audit_payment_equivalence, audit_self_scheduling
from .relax import SolverConfig, solve_relaxation
from .rounding import RoundingConfig, RoundingMode, round_schedule

ALGORITHMS = ("rar", "rar-realistic", "greedy", "relax-round", "oracle", "modified-rar", "saa-rar")
SIG_DIGITS = 12


def fmt(x) -> str:
    """Fixed 12-significant-digit text for reports."""
    return format(float(x), f".{SIG_DIGITS}g")


def rounded(obj):
    """Copy of a JSON-ready structure with floats cut to 12 significant digits."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(fmt(obj))
    if isinstance(obj, (np.floating,)):
        return rounded(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    return obj


def theorem_bound(instance: Instance) -> float:
    return rar_bound(instance) if instance.all_flat else rar_bound_realistic(instance)


def instance_summary(instance: Instance) -> dict:
    return {
        "J": instance.n_jobs,
        "T": instance.horizon,
        "dmax": instance.dmax,
        "rectangular": instance.all_flat,
        "cost": instance.cost.kind.value,
        "lipschitz": instance.lipschitz,
        "theorem_bound": theorem_bound(instance),
    }


@dataclass
class RunReport:
    instance: dict
    seed: int
    results: dict = field(default_factory=dict)
    loads: dict = field(default_factory=dict)
    renewable: Optional[np.ndarray] = None

    @property
    def oracle_cost(self) -> Optional[float]:
        r = self.results.get("oracle")
        return r["cost"] if r and r.get("status") == "ok" else None

    def statuses(self) -> set:
        return {r.get("status") for r in self.results.values()}

    def to_dict(self, timing: bool = True) -> dict:
        res = {}
        for name, r in self.results.items():
            r = dict(r)
            if not timing:
                r.pop("wall_time", None)
                r.pop("timings", None)
            res[name] = r
        return rounded({"instance": self.instance, "seed": self.seed, "algorithms": res})

    def loads_csv(self) -> str:
        T = self.instance["T"]
        extra = [a for a in ALGORITHMS if a in self.loads and a not in ("rar", "oracle", "greedy")]
        cols = ["t", "L_rar", "L_oracle", "L_greedy", "R"] + [f"L_{a}" for a in extra]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for t in range(T):
            row = [t + 1]
            for a in ("rar", "oracle", "greedy"):
                row.append(fmt(self.loads[a][t]) if a in self.loads else "")
            row.append(fmt(self.renewable[t]) if self.renewable is not None else "")
            row.extend(fmt(self.loads[a][t]) for a in extra)
            w.writerow(row)
        return buf.getvalue()


def _pricing(instance, relaxation, S) -> dict:
    if not instance.cost.differentiable:
        return {"skipped": "cost not differentiable"}
    gap = relaxation.gap_certificate
    ledger = audit_payment_equivalence(instance, relaxation.schedule, S, relaxation.prices, gap)
    ss = audit_self_scheduling(instance, S, relaxation.prices, gap)
    return {"payment_equivalence": ledger.to_dict(), "self_scheduling": ss.to_dict()}


def run_algorithms(instance: Instance, algos: Sequence[str], seed: int = 0,
                   solver_config: Optional[SolverConfig] = None,
                   round_mode: RoundingMode = RoundingMode.RANDOMIZED,
                   oracle_budget: int = DEFAULT_BUDGET, audit_pricing: bool = False,
                   saa_samples: int = 500, eval_samples: int = 20000) -> RunReport:
    """Run each named algorithm on ``instance`` and collect a report.

    Failures are recorded per algorithm with status ``budget_exceeded``,
    ``not_converged`` or ``error``; the remaining algorithms still run.
    """
    unknown = [a for a in algos if a not in ALGORITHMS]
    if unknown:
        raise ValueError(f"unknown algorithms {unknown}; choose from {', '.join(ALGORITHMS)}")
    solver_config = solver_config or SolverConfig()
    rc = RoundingConfig(mode=RoundingMode(round_mode), seed=seed)
    report = RunReport(instance_summary(instance), seed, renewable=instance.renewable)
    stochastic = instance.cost.kind is CostKind.EXPECTED_SHORTFALL
    relax_cache = {}

    def relaxation():
        if "sol" not in relax_cache:
            t0 = time.perf_counter()
            relax_cache["sol"] = solve_relaxation(instance, solver_config)
            relax_cache["time"] = time.perf_counter() - t0
        return relax_cache["sol"], relax_cache["time"]

    def finish(name, S, t0, extra):
        L = aggregate_load(instance, S)
        entry = {"status": "ok", "cost": evaluate_cost(instance, L),
                 "wall_time": time.perf_counter() - t0, "seeds": {"rounding": seed}}
        entry.update(extra)
        if check_feasibility(instance, S, integral=True):
            entry["status"] = "infeasible"
        report.results[name] = entry
        report.loads[name] = L
        if stochastic:
            from .stochastic import StochasticCost, monte_carlo_cost

            mc, se = monte_carlo_cost(L, StochasticCost(instance.cost.shortfall), eval_samples,
                                      int(substream(seed, "evaluate").integers(2**31)))
            entry.update(mc_cost=mc, mc_se=se)

    for name in algos:
        t0 = time.perf_counter()
        try:
            if name in ("rar", "rar-realistic"):
                sol, trel = relaxation()
                t0 -= trel
                algo = "realistic" if name == "rar-realistic" else "auto"
                res = rar(instance, relaxation=sol, rounding_config=rc, algorithm=algo)
                extra = {
                    "relaxed_cost": sol.objective,
                    "gap_certificate": sol.gap_certificate,
                    "solver_iterations": sol.iterations,
                    "fractional_before": res.adjust_report.fractional_before,
                    "fractional_after": res.adjust_report.fractional_after,
                    "adjust_iterations": res.adjust_report.iterations,
                    "max_load_deviation": res.adjust_report.max_load_deviation,
                    "adjust_algorithm": res.adjust_report.algorithm,
                    "timings": dict(res.timings, relax=trel),
                }
                if audit_pricing:
                    extra["pricing"] = _pricing(instance, sol, res.schedule)
                finish(name, res.schedule, t0, extra)
            elif name == "relax-round":
                sol, trel = relaxation()
                t0 -= trel
                S = relax_round_no_adjust(instance, rounding_config=rc, relaxation=sol)
                finish(name, S, t0, {"relaxed_cost": sol.objective,
                                     "gap_certificate": sol.gap_certificate})
            elif name == "greedy":
                finish(name, greedy_schedule(instance), t0, {})
            elif name == "oracle":
                o = brute_force_optimal(instance, oracle_budget)
                finish(name, o.schedule(instance), t0, {"nodes_explored": o.nodes_explored})
                report.results[name].pop("seeds")
            elif name == "modified-rar":
                from .stochastic import modified_rar

                res = modified_rar(instance, solver_config, rc)
                finish(name, res.schedule, t0, {
                    "surrogate_cost": res.cost,
                    "fractional_before": res.adjust_report.fractional_before,
                    "fractional_after": res.adjust_report.fractional_after})
            elif name == "saa-rar":
                if not stochastic:
                    raise FlexSchedError("saa-rar needs an expected-shortfall instance")
                from .stochastic import StochasticCost, baseline_saa_rar

                sseed = int(substream(seed, "sampling").integers(2**31))
                res = baseline_saa_rar(instance, StochasticCost(instance.cost.shortfall),
                                       saa_samples, seed=sseed, rounding_config=rc)
                finish(name, res.schedule, t0, {"saa_samples": saa_samples,
                                                "seeds": {"rounding": seed, "sampling": sseed}})
        except BudgetExceeded as exc:
            report.results[name] = {"status": "budget_exceeded", "bound": exc.bound, "message": str(exc)}
        except NotConverged as exc:
            report.results[name] = {"status": "not_converged", "gap": exc.gap, "message": str(exc)}
        except FlexSchedError as exc:
            report.results[name] = {"status": "error", "message": str(exc)}

    ref = report.oracle_cost
    J = max(instance.n_jobs, 1)
    for name, r in report.results.items():
        if r.get("status") != "ok":
            continue
        if ref is not None:
            r["suboptimality_pct"] = (r["cost"] - ref) / ref * 100.0 if ref != 0 else None
            r["per_job_gap"] = (r["cost"] - ref) / J
        if "sol" in relax_cache:
            lb = relax_cache["sol"].objective
            r["gap_vs_relaxation_pct"] = (r["cost"] - lb) / lb * 100.0 if lb != 0 else None
    return report


# sweeps --------------------------------------------------------------------------

SWEEP_COLUMNS = ["kind", "J", "shape", "index", "seed", "algo", "status", "cost", "reference",
                 "reference_cost", "suboptimality_pct", "per_job_gap", "relax_time", "adjust_time",
                 "wall_time", "fractional_before", "fractional_after", "n", "mean", "std"]


@dataclass(frozen=True)
class SweepSpec:
    J_values: tuple = (20, 50, 100)
    instances: int = 50
    T: int = 24
    shapes: tuple = (ShapeKind.RECTANGULAR, ShapeKind.REALISTIC)
    algos: tuple = ("rar", "greedy")
    seed: int = 0
    gap_tolerance: float = 1e-7
    round_mode: RoundingMode = RoundingMode.RANDOMIZED
    oracle_budget: int = DEFAULT_BUDGET
    timing: bool = True


def sweep_instance(spec: SweepSpec, J: int, shape: ShapeKind, index: int):
    code = 0 if ShapeKind(shape) is ShapeKind.RECTANGULAR else 1
    iseed = int(substream(spec.seed, "instance", J, code, index).integers(2**31))
    cfg = SyntheticConfig(J=J, T=spec.T, shape=ShapeKind(shape))
    return generate_synthetic(cfg, iseed), iseed


def _sweep_cell(args) -> list:
    spec, J, shape, index = args
    inst, iseed = sweep_instance(spec, J, shape, index)
    report = run_algorithms(inst, spec.algos, seed=iseed,
                            solver_config=SolverConfig(gap_tolerance=spec.gap_tolerance),
                            round_mode=spec.round_mode, oracle_budget=spec.oracle_budget)
    ref_kind, ref = "relaxation", None
    if report.oracle_cost is not None:
        ref_kind, ref = "oracle", report.oracle_cost
    else:
        try:
            ref = solve_relaxation(inst, SolverConfig(gap_tolerance=spec.gap_tolerance)).objective
        except NotConverged as exc:
            ref = exc.best.objective
    rows = []
    for algo in spec.algos:
        r = report.results[algo]
        row = {"kind": "instance", "J": J, "shape": ShapeKind(shape).value, "index": index,
               "seed": iseed, "algo": algo, "status": r.get("status"), "reference": ref_kind,
               "reference_cost": ref}
        if r.get("status") == "ok":
            row["cost"] = r["cost"]
            row["suboptimality_pct"] = (r["cost"] - ref) / ref * 100.0 if ref else None
            row["per_job_gap"] = (r["cost"] - ref) / max(J, 1)
            row["fractional_before"] = r.get("fractional_before")
            row["fractional_after"] = r.get("fractional_after")
            if spec.timing:
                row["wall_time"] = r.get("wall_time")
                tm = r.get("timings", {})
                row["relax_time"] = tm.get("relax")
                row["adjust_time"] = tm.get("adjust")
        rows.append(row)
    return rows


def sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Instance rows sorted by ``(J, shape, index, algo)`` followed by per-cell summaries."""
    tasks = [(spec, J, ShapeKind(s), k) for J in spec.J_values for s in spec.shapes
             for k in range(spec.instances)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_sweep_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        chunks = [_sweep_cell(t) for t in tasks]
    order = {a: i for i, a in enumerate(spec.algos)}
    rows = sorted((r for c in chunks for r in c),
                  key=lambda r: (r["J"], r["shape"], r["index"], order[r["algo"]]))
    return rows + summarize(rows, spec)


def summarize(rows: Iterable[dict], spec: SweepSpec) -> list:
    cells = {}
    for r in rows:
        if r["kind"] != "instance" or r.get("suboptimality_pct") is None:
            continue
        cells.setdefault((r["J"], r["shape"], r["algo"]), []).append(r["suboptimality_pct"])
    order = {a: i for i, a in enumerate(spec.algos)}
    out = []
    for (J, shape, algo), v in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1], order[kv[0][2]])):
        a = np.asarray(v, dtype=float)
        out.append({"kind": "summary", "J": J, "shape": shape, "algo": algo, "n": a.size,
                    "mean": float(a.mean()), "std": float(a.std(ddof=1)) if a.size > 1 else 0.0})
    return out


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else fmt(r[k]) if isinstance(r[k], float) else r[k])
                    for k in SWEEP_COLUMNS})
    return buf.getvalue()


# verification battery ----------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _battery(seed: int, n: int, J_range, T_range, shapes=(ShapeKind.RECTANGULAR, ShapeKind.REALISTIC),
             slack=(0, 6), durations=(1, 4)):
    rng = substream(seed, "verify")
    for k in range(n):
        J = int(rng.integers(J_range[0], J_range[1] + 1))
        T = int(rng.integers(T_range[0], T_range[1] + 1))
        shape = shapes[k % len(shapes)]
        cfg = SyntheticConfig(J=J, T=T, shape=shape, slack_range=slack,
                              duration_range=(durations[0], min(durations[1], T)))
        yield generate_synthetic(cfg, int(rng.integers(2**31)))


def verify(seed: int = 0, adjust_fn: Optional[Callable] = None, quick: bool = False) -> list:
    """Run the guarantee checks over seeded batteries; returns a :class:`CheckResult` list.

    ``adjust_fn(instance, schedule) -> (schedule, report)`` replaces the
    adjustment step, which lets a deliberately broken variant be audited.
    """
    adjust_fn = adjust_fn or (lambda inst, S: adjust(inst, S))
    scale = 1 if quick else 2
    checks = []

    # adjustment: losslessness, fraction bounds, relaxation feasibility
    worst_dev, worst_cost, bad_frac, bad_feas, n = 0.0, 0.0, 0, 0, 0
    for inst in _battery(seed, 20 * scale, (5, 60), (6, 16)):
        sol = solve_relaxation(inst)
        S, _ = adjust_fn(inst, sol.schedule)
        L = aggregate_load(inst, S)
        worst_dev = max(worst_dev, float(np.max(np.abs(L - sol.load))))
        phi_r = inst.cost.total(sol.load)
        worst_cost = max(worst_cost, abs(inst.cost.total(L) - phi_r) / max(1.0, phi_r))
        T = inst.horizon
        limit = 2 * inst.dmax * T if inst.all_flat else inst.dmax * T * (T - 1)
        bad_frac += count_fractional(S) > limit
        bad_feas += bool(check_feasibility(inst, S, tol=1e-9))
        n += 1
    checks.append(CheckResult("losslessness", worst_dev <= 1e-8 and worst_cost <= 1e-8,
                              f"{n} instances, max load change {worst_dev:.3e}, "
                              f"max relative cost change {worst_cost:.3e}"))
    checks.append(CheckResult("fractional-bound", bad_frac == 0, f"{bad_frac} of {n} over the bound"))
    checks.append(CheckResult("feasibility", bad_feas == 0, f"{bad_feas} of {n} infeasible after adjustment"))

    # full pipeline against the exact oracle
    viol, infeasible, m = 0, 0, 0
    for inst in _battery(seed + 1, 15 * scale, (2, 6), (3, 6), slack=(0, 3), durations=(1, 3)):
        o = brute_force_optimal(inst)
        sol = solve_relaxation(inst)
        S, _ = adjust_fn(inst, sol.schedule)
        try:
            SI = round_schedule(S, RoundingConfig(seed=m), [j.id for j in inst.jobs])
        except FlexSchedError:
            infeasible += 1
            continue
        infeasible += bool(check_feasibility(inst, SI, integral=True))
        gap = inst.cost.total(aggregate_load(inst, SI)) - o.optimal_cost
        viol += gap > theorem_bound(inst) + 1e-9
        m += 1
    checks.append(CheckResult("theorem-bound", viol == 0 and infeasible == 0,
                              f"{viol} bound violations, {infeasible} infeasible roundings"))

    # pricing
    worst, ss_viol, flagged = 0.0, 0, 0
    for inst in _battery(seed + 2, 5 * scale, (5, 30), (4, 10)):
        sol = solve_relaxation(inst, SolverConfig(gap_tolerance=1e-9))
        S, _ = adjust_fn(inst, sol.schedule)
        try:
            SI = round_schedule(S, RoundingConfig(seed=seed), [j.id for j in inst.jobs])
        except FlexSchedError:
            flagged += inst.n_jobs
            continue
        ledger = audit_payment_equivalence(inst, sol.schedule, SI, sol.prices, sol.gap_certificate)
        top = float(np.max(np.abs(ledger.integral))) or 1.0
        worst = max(worst, ledger.max_residual / top)
        flagged += len(ledger.support_violations)
        ss_viol += len(audit_self_scheduling(inst, SI, sol.prices, sol.gap_certificate).violations)
    checks.append(CheckResult("pricing-audit", worst <= 1e-6 and ss_viol == 0 and flagged == 0,
                              f"max relative residual {worst:.3e}, {ss_viol} self-scheduling "
                              f"violations, {flagged} support violations"))

    # cost equivalence on single-slot jobs
    from .stochastic import shortfall_instance

    inst = shortfall_instance(J=20, T=12, seed=seed)
    true_cost = inst.cost
    surrogate = solve_relaxation(inst.with_cost(CostModel.quadratic_pure(), renewable=None))
    try:
        exact = solve_relaxation(inst)
    except NotConverged as exc:
        exact = exc.best
    diff = true_cost.total(surrogate.load) - exact.objective
    tol = exact.gap_certificate + 1e-6 * max(1.0, exact.objective)
    checks.append(CheckResult("cost-equivalence", -tol <= diff <= tol,
                              f"surrogate minus exact relaxation {diff:.3e}, tolerance {tol:.3e}"))
    return checks
