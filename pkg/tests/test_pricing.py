import numpy as np
import pytest

from flexsched.errors import DimensionMismatch
from flexsched.generators import SyntheticConfig, generate_adversarial, generate_synthetic
from flexsched.model import CostModel, Instance, Job, ShapeKind, placement_costs, starts_to_schedule
from flexsched.pipeline import rar
from flexsched.pricing import (PRICE_TOL_FLOOR, audit_payment_equivalence, audit_self_scheduling,
                               payment, price_tolerance, start_prices)
from flexsched.relax import SolverConfig, solve_relaxation
from flexsched.rounding import RoundingConfig

TIGHT = SolverConfig(gap_tolerance=1e-10)


def test_payment_examples():
    job = Job.rectangular(0, 2.0, 2, 1, 3)
    assert payment(job, [1.0, 0.0, 0.0], [1.0, 2.0, 3.0]) == 6.0
    assert payment(job, [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]) == 0.0
    unit = Job.rectangular(0, 1.0, 1, 1, 2)
    assert payment(unit, [0.5, 0.5], [4.0, 4.0]) == 4.0
    with pytest.raises(DimensionMismatch):
        payment(unit, [1.0, 0.0], [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        payment(job, [0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


def test_start_prices_match_placement_costs():
    inst = generate_synthetic(SyntheticConfig(J=8, T=9, shape=ShapeKind.REALISTIC), 1)
    price = np.random.default_rng(0).normal(size=9)
    B = placement_costs(inst, price)
    for j, job in enumerate(inst.jobs):
        sp = start_prices(job, price)
        ok = np.isfinite(sp)
        np.testing.assert_allclose(sp[ok], B[j, ok], atol=1e-12)
        assert ok.sum() == 9 - job.duration + 1


def test_price_tolerance_floor():
    inst = generate_adversarial(2, 3)
    assert price_tolerance(inst, 0.0) == PRICE_TOL_FLOOR
    assert price_tolerance(inst, 1e-3) == 1e-3
    assert price_tolerance(Instance(2, []), 5.0) == PRICE_TOL_FLOOR


def test_identical_schedules_zero_residual():
    inst = generate_synthetic(SyntheticConfig(J=6, T=6), 0)
    S = starts_to_schedule(inst, inst.first_start + 1)
    ledger = audit_payment_equivalence(inst, S, S, np.arange(6.0))
    assert np.all(ledger.residual == 0.0)
    assert ledger.flagged == []


def test_support_violation_flagged():
    inst = Instance(3, [Job.rectangular(0, 1.0, 1, 1, 3), Job.rectangular(1, 1.0, 1, 1, 3)])
    SR = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    SI = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    # flat prices: equal payments, but job 0 landed outside its support
    ledger = audit_payment_equivalence(inst, SR, SI, np.ones(3))
    assert ledger.support_violations == [0]
    assert ledger.flagged == [0]
    assert ledger.max_residual == 0.0


def test_residual_beyond_tolerance_flagged():
    inst = Instance(2, [Job.rectangular(0, 1.0, 1, 1, 2)])
    ledger = audit_payment_equivalence(inst, [[0.5, 0.5]], [[1.0, 0.0]], [1.0, 2.0])
    assert ledger.residual[0] == pytest.approx(0.5)
    assert ledger.flagged == [0]


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("shape", list(ShapeKind))
def test_rar_payment_equivalence(seed, shape):
    inst = generate_synthetic(SyntheticConfig(J=20, T=10, shape=shape), seed)
    res = rar(inst, solver_config=TIGHT, rounding_config=RoundingConfig(seed=seed))
    sol = res.relaxation
    ledger = audit_payment_equivalence(inst, sol.schedule, res.schedule, sol.prices, sol.gap_certificate)
    assert ledger.max_residual <= 1e-6 * np.max(np.abs(ledger.integral))
    assert ledger.flagged == []
    report = audit_self_scheduling(inst, res.schedule, sol.prices, sol.gap_certificate)
    assert report.violations == []


def test_single_start_job_vacuous():
    inst = Instance(3, [Job.rectangular(0, 2.0, 3, 1, 3)])
    rep = audit_self_scheduling(inst, [[1.0, 0.0, 0.0]], [5.0, -1.0, 2.0])
    assert rep.violations == [] and rep.ties == [] and rep.worst_margin == 0.0


def test_ties_reported_not_flagged():
    inst = generate_adversarial(1, 3)
    S = starts_to_schedule(inst, [1, 1, 1])
    rep = audit_self_scheduling(inst, S, np.full(3, 2.0))
    assert rep.violations == []
    assert sorted(rep.ties) == [(j, t) for j in range(3) for t in (2, 3)]


def test_perturbed_prices_violate():
    inst = generate_synthetic(SyntheticConfig(J=40, T=12, cost="quadratic_pure"), 3)
    res = rar(inst, solver_config=TIGHT)
    sol = res.relaxation
    tol = price_tolerance(inst, sol.gap_certificate)
    clean = audit_self_scheduling(inst, res.schedule, sol.prices, tolerance=tol)
    assert clean.violations == []
    noise = np.random.default_rng(0).normal(scale=10 * tol, size=inst.horizon)
    noisy = audit_self_scheduling(inst, res.schedule, sol.prices + noise, tolerance=tol)
    assert noisy.violations


@pytest.mark.parametrize("seed", range(5))
def test_beta_equalization(seed):
    inst = generate_synthetic(SyntheticConfig(J=25, T=10, shape=ShapeKind.REALISTIC), seed)
    sol = solve_relaxation(inst, TIGHT)
    B = placement_costs(inst, sol.prices)
    ptol = price_tolerance(inst, sol.gap_certificate)
    for j in range(inst.n_jobs):
        w = sol.schedule[j]
        sup = np.flatnonzero(w > 1e-9)
        if sup.size < 2:
            continue
        # the gap bounds each supported excess by gap / weight
        spread = B[j, sup].max() - B[j, sup].min()
        assert spread <= ptol * inst.energies[j] / w[sup].min() + 1e-9


def test_linear_prices_and_payments():
    slope = np.array([3.0, 1.0, 2.0, 5.0])
    inst = Instance(4, [Job.rectangular(0, 2.0, 2, 1, 4)], CostModel.linear(slope))
    res = rar(inst)
    assert res.schedule[0].tolist() == [0.0, 1.0, 0.0, 0.0]
    assert payment(inst.jobs[0], res.schedule[0], res.relaxation.prices) == 2.0 * (1.0 + 2.0)
