from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexsched.errors import (DimensionMismatch, DomainViolation, InfeasibleConfig, InvalidArgs,
                              InvalidJob, InvalidStart, ParseError, WindowError)
from flexsched.generators import SyntheticConfig, generate_adversarial, generate_synthetic
from flexsched.io import instance_from_dict, instance_to_dict, load_instance, load_sessions_csv, save_instance
from flexsched.model import (CostModel, Instance, Job, ShapeKind, admissible_starts, aggregate_load,
                             check_feasibility, evaluate_cost, placement_costs, profile_column,
                             starts_to_schedule, uniform_schedule)

from conftest import cycle_instance, cycle_schedule

DATA = Path(__file__).parent / "data"


@pytest.mark.parametrize("arrival,deadline,d,expected", [
    (1, 3, 1, [1, 2, 3]),
    (2, 5, 3, [2, 3]),
    (1, 4, 4, [1]),
])
def test_admissible_starts(arrival, deadline, d, expected):
    job = Job.rectangular(0, 1.0, d, arrival, deadline)
    assert list(admissible_starts(job, 6)) == expected


def test_profile_columns():
    assert profile_column(Job.rectangular(0, 2.0, 2, 1, 4), 1, 4).tolist() == [2, 2, 0, 0]
    assert profile_column(Job(0, [1.0, 3.0], 1, 4), 3, 4).tolist() == [0, 0, 1, 3]
    assert profile_column(Job.rectangular(0, 1.0, 1, 1, 3), 2, 3).tolist() == [0, 1, 0]


def test_profile_column_rejects_bad_start():
    with pytest.raises(InvalidStart):
        profile_column(Job.rectangular(0, 1.0, 2, 2, 4), 1, 4)
    with pytest.raises(InvalidStart):
        profile_column(Job.rectangular(0, 1.0, 2, 2, 4), 4, 4)


def test_job_validation():
    with pytest.raises(InvalidJob):
        Job.rectangular(0, 1.0, 3, 2, 3)
    with pytest.raises(InvalidJob):
        Job(0, [1.0, -1.0], 1, 3)
    with pytest.raises(InvalidJob):
        Job(0, [1.0, 2.0], 1, 3, ShapeKind.RECTANGULAR)
    with pytest.raises(InvalidJob):
        Instance(3, [Job.rectangular(0, 1.0, 1, 1, 4)])
    assert Job(0, [2.0, 2.0], 1, 3).kind is ShapeKind.RECTANGULAR
    assert Job(0, [1.0, 2.0], 1, 3).kind is ShapeKind.REALISTIC


def test_aggregate_load_cycle_example():
    L = aggregate_load(cycle_instance(), cycle_schedule())
    np.testing.assert_allclose(L, [7 / 8, 2, 9 / 8], atol=1e-15)


def test_aggregate_load_zero_and_single():
    inst = cycle_instance()
    assert aggregate_load(inst, np.zeros((4, 3))).tolist() == [0, 0, 0]
    job = Job(0, [1.0, 3.0], 1, 4)
    single = Instance(4, [job])
    S = starts_to_schedule(single, [2])
    np.testing.assert_array_equal(aggregate_load(single, S), profile_column(job, 2, 4))
    with pytest.raises(DimensionMismatch):
        aggregate_load(inst, np.zeros((4, 2)))


def test_evaluate_cost_examples():
    jobs = [Job.rectangular(0, 1.0, 1, 1, 2), Job.rectangular(1, 1.0, 1, 1, 2)]
    inst = Instance(2, jobs, CostModel.quadratic_tracking(), renewable=[1.0, 1.0])
    assert evaluate_cost(inst, [1.0, 2.0]) == 1.0
    assert evaluate_cost(inst, [1.0, 1.0]) == 0.0
    adv = generate_adversarial(3, 4)
    assert evaluate_cost(adv, [12.0, 0, 0, 0]) == 144.0
    with pytest.raises(DomainViolation):
        evaluate_cost(inst, [3.0, 0.0])
    with pytest.raises(DimensionMismatch):
        evaluate_cost(inst, [1.0])


def test_check_feasibility_reports():
    inst = cycle_instance()
    assert check_feasibility(inst, cycle_schedule()) == []
    S = cycle_schedule()
    S[0, 1] -= 0.1
    kinds = {v.kind for v in check_feasibility(inst, S)}
    assert "row_sum" in kinds
    binary = check_feasibility(inst, cycle_schedule(), integral=True)
    assert binary and all(v.kind == "binary" for v in binary)
    narrow = Instance(3, [Job.rectangular(0, 1.0, 1, 2, 3)])
    bad = check_feasibility(narrow, np.array([[1.0, 0.0, 0.0]]))
    assert [(v.kind, v.slot) for v in bad] == [("support", 1)]


def test_placement_costs_match_columns():
    inst = generate_synthetic(SyntheticConfig(J=6, T=8, shape=ShapeKind.REALISTIC), 3)
    price = np.linspace(-1, 2, 8)
    B = placement_costs(inst, price)
    for j, job in enumerate(inst.jobs):
        for t in admissible_starts(job, 8):
            assert B[j, t - 1] == pytest.approx(price @ profile_column(job, t, 8), abs=1e-12)


def test_generator_deterministic():
    cfg = SyntheticConfig(J=100, T=24)
    a, b = generate_synthetic(cfg, 7), generate_synthetic(cfg, 7)
    assert instance_to_dict(a) == instance_to_dict(b)
    assert instance_to_dict(a) != instance_to_dict(generate_synthetic(cfg, 8))


@pytest.mark.parametrize("shape", list(ShapeKind))
def test_generator_renewable_scaling(shape):
    inst = generate_synthetic(SyntheticConfig(J=80, T=24, shape=shape), 1)
    assert inst.renewable.sum() == pytest.approx(0.7 * inst.energies.sum(), abs=1e-6)


def test_generator_edge_cases():
    empty = generate_synthetic(SyntheticConfig(J=0, T=24), 0)
    assert empty.n_jobs == 0 and empty.horizon == 24
    with pytest.raises(InfeasibleConfig):
        generate_synthetic(SyntheticConfig(J=3, T=2, duration_range=(3, 4)), 0)
    with pytest.raises(InfeasibleConfig):
        generate_synthetic(SyntheticConfig(arrival="bimodal"), 0)


def test_adversarial_family():
    inst = generate_adversarial(1, 2)
    assert inst.n_jobs == 2
    assert inst.jobs[0].shape.tolist() == inst.jobs[1].shape.tolist() == [1.0]
    inst = generate_adversarial(3, 4)
    assert inst.n_jobs == 12 and inst.admissible_mask.all()
    with pytest.raises(InvalidArgs):
        generate_adversarial(2, 1)
    with pytest.raises(InvalidArgs):
        generate_adversarial(0, 3)


def test_instance_json_round_trip(tmp_path):
    for shape in ShapeKind:
        inst = generate_synthetic(SyntheticConfig(J=10, T=12, shape=shape), 4)
        path = tmp_path / f"{shape.value}.json"
        save_instance(inst, path)
        back = load_instance(path)
        assert instance_to_dict(back) == instance_to_dict(inst)
    pwl = Instance(3, [Job.rectangular(0, 1.0, 1, 1, 3)],
                   CostModel.piecewise_linear([[0.0, 1.0, 3.0]], [[0.0, -1.0, -5.0]]))
    assert instance_to_dict(instance_from_dict(instance_to_dict(pwl))) == instance_to_dict(pwl)


def test_sessions_csv_fixture():
    skipped = []
    inst = load_sessions_csv(DATA / "sessions.csv", T=24, skipped=skipped)
    assert inst.n_jobs == 2
    first, second = inst.jobs
    # 08:10 plug-in, 11:40 done, 14:00 unplug: slot 9, four slots, last slot 14
    assert (first.arrival, first.duration, first.deadline) == (9, 4, 14)
    assert first.kind is ShapeKind.RECTANGULAR
    np.testing.assert_allclose(first.shape, [6.0] * 4)
    assert (second.arrival, second.duration, second.deadline) == (7, 2, 11)
    assert second.kind is ShapeKind.REALISTIC
    np.testing.assert_allclose(second.shape, [5.0, 5.0])
    assert len(skipped) == 1 and isinstance(skipped[0], WindowError) and skipped[0].line == 4


def test_sessions_csv_empty_and_malformed(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert load_sessions_csv(empty).n_jobs == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("arrival,departure,completion,energy_kwh\n"
                   "2024-01-01T08:00:00,2024-01-01T10:00:00,2024-01-01T09:00:00,5\n"
                   "yesterday,2024-01-01T10:00:00,2024-01-01T09:00:00,5\n")
    with pytest.raises(ParseError) as err:
        load_sessions_csv(bad)
    assert err.value.line == 3


# properties -----------------------------------------------------------------


@st.composite
def instances(draw, max_jobs=6, max_T=8):
    T = draw(st.integers(1, max_T))
    n = draw(st.integers(1, max_jobs))
    jobs = []
    for j in range(n):
        d = draw(st.integers(1, T))
        a = draw(st.integers(1, T - d + 1))
        dl = draw(st.integers(a + d - 1, T))
        shape = draw(st.lists(st.floats(0.0, 5.0), min_size=d, max_size=d))
        jobs.append(Job(j, shape, a, dl))
    return Instance(T, jobs)


def _random_schedule(inst, rng):
    W = rng.random((inst.n_jobs, inst.horizon)) * inst.admissible_mask
    W[inst.admissible_mask & (W == 0)] = 0.5
    return W / W.sum(axis=1, keepdims=True)


@given(instances())
@settings(max_examples=60, deadline=None)
def test_placement_conserves_energy(inst):
    for job in inst.jobs:
        for t in admissible_starts(job, inst.horizon):
            assert profile_column(job, t, inst.horizon).sum() == pytest.approx(job.energy, abs=1e-12)


@given(instances(), st.floats(0.0, 1.0), st.integers(0, 2**31))
@settings(max_examples=60, deadline=None)
def test_aggregate_load_linear(inst, alpha, seed):
    rng = np.random.default_rng(seed)
    S1, S2 = _random_schedule(inst, rng), _random_schedule(inst, rng)
    mixed = aggregate_load(inst, alpha * S1 + (1 - alpha) * S2)
    split = alpha * aggregate_load(inst, S1) + (1 - alpha) * aggregate_load(inst, S2)
    np.testing.assert_allclose(mixed, split, atol=1e-9)


@given(st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_cost_convex_along_segments(seed):
    rng = np.random.default_rng(seed)
    inst = generate_synthetic(SyntheticConfig(J=12, T=10), seed % 1000)
    for _ in range(20):
        S1, S2 = _random_schedule(inst, rng), _random_schedule(inst, rng)
        mid = evaluate_cost(inst, aggregate_load(inst, (S1 + S2) / 2))
        ends = (evaluate_cost(inst, aggregate_load(inst, S1)) + evaluate_cost(inst, aggregate_load(inst, S2))) / 2
        assert mid <= ends + 1e-9


@given(st.integers(0, 2**31), st.sampled_from(list(ShapeKind)))
@settings(max_examples=15, deadline=None)
def test_generator_bit_identical(seed, shape):
    cfg = SyntheticConfig(J=15, T=12, shape=shape)
    a, b = generate_synthetic(cfg, seed), generate_synthetic(cfg, seed)
    assert np.array_equal(a.shapes, b.shapes) and np.array_equal(a.renewable, b.renewable)
    assert [(j.arrival, j.deadline) for j in a.jobs] == [(j.arrival, j.deadline) for j in b.jobs]
    assert check_feasibility(a, uniform_schedule(a)) == []
