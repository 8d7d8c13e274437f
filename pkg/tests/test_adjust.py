from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexsched import _kernels
from flexsched.adjust import (DurationMultigraph, adjust, adjust_realistic, adjust_rectangular,
                              find_cycle, graph_for_duration, null_vector)
from flexsched._pykernels import cancel_cycle
from flexsched.errors import InfeasibleInput, NotRectangular
from flexsched.generators import SyntheticConfig, generate_synthetic
from flexsched.model import (ShapeKind, aggregate_load, check_feasibility, count_fractional,
                             starts_to_schedule)
from flexsched.relax import SolverConfig, solve_relaxation

from conftest import BACKENDS, SHAPES_UPDATED


def _relaxed(J, T, shape, seed):
    inst = generate_synthetic(SyntheticConfig(J=J, T=T, shape=shape), seed)
    return inst, solve_relaxation(inst, SolverConfig(gap_tolerance=1e-6)).schedule


def test_rectangular_worked_example(cycle_example, kernels):
    inst, S = cycle_example
    A, rep = adjust_rectangular(inst, S, max_iter=1, kernels=kernels)
    assert rep.iterations == 1
    assert A[1].tolist() == [0.0, 0.0, 1.0]
    np.testing.assert_allclose(aggregate_load(inst, A), [7 / 8, 2, 9 / 8], atol=1e-12)
    assert S[1, 1] == 0.25  # input untouched


def test_rectangular_full_run(cycle_example, kernels):
    inst, S = cycle_example
    A, rep = adjust_rectangular(inst, S, kernels=kernels)
    assert rep.fractional_after <= 2 * inst.dmax * inst.horizon
    assert rep.fractional_after < rep.fractional_before == 7
    assert check_feasibility(inst, A) == []
    np.testing.assert_allclose(aggregate_load(inst, A), aggregate_load(inst, S), atol=1e-12)


def test_realistic_worked_example(shapes_example, kernels):
    inst, S = shapes_example
    A, rep = adjust_realistic(inst, S, max_iter=1, trace=True, kernels=kernels)
    step = rep.trace[0]
    assert step.slots == (1, 3) and step.jobs == (0, 1, 2)
    np.testing.assert_allclose(step.direction_leading, [1, -3, 2], atol=1e-12)
    assert step.shift_leading == pytest.approx(1 / 8, abs=1e-12)
    expected = np.array([[float(x) for x in row] for row in SHAPES_UPDATED])
    np.testing.assert_allclose(A, expected, atol=1e-12)
    assert A[2, 2] == 0.0
    np.testing.assert_allclose(aggregate_load(inst, A), aggregate_load(inst, S), atol=1e-12)


def test_realistic_example_exact_in_rationals():
    # independent check of the worked update in exact arithmetic
    S = [[Fraction(1, 8), 0, Fraction(5, 8), Fraction(1, 4)],
         [Fraction(3, 5), 0, Fraction(2, 5), 0],
         [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4), 0]]
    direction, shift = [1, -3, 2], Fraction(1, 8)
    for j in range(3):
        S[j][0] += direction[j] * shift
        S[j][2] -= direction[j] * shift
    assert S == SHAPES_UPDATED[:3]


@pytest.mark.parametrize("algo", [adjust_rectangular, adjust_realistic])
def test_integral_input_unchanged(algo, cycle_example):
    inst, _ = cycle_example
    S = starts_to_schedule(inst, [1, 3, 2, 2])
    A, rep = algo(inst, S)
    np.testing.assert_array_equal(A, S)
    assert rep.iterations == 0 and rep.fractional_after == 0


def test_realistic_guard_never_fires(shapes_example):
    inst, S = shapes_example
    # only two fractional jobs per pair, fewer than dmax + 1 = 3
    S = S.copy()
    S[2] = [1.0, 0, 0, 0]
    S[3] = [0, 0, 1.0, 0]
    A, rep = adjust_realistic(inst, S)
    assert rep.iterations == 0
    np.testing.assert_array_equal(A, S)


def test_errors(shapes_example, cycle_example):
    inst, S = shapes_example
    with pytest.raises(NotRectangular):
        adjust_rectangular(inst, S)
    inst, S = cycle_example
    S = S.copy()
    S[0, 0] = 0.9
    with pytest.raises(InfeasibleInput):
        adjust(inst, S)


def test_find_cycle_triangle():
    g = DurationMultigraph(3)
    g.add_edge(0, 1, 10)
    g.add_edge(1, 2, 11)
    g.add_edge(0, 2, 12)
    cyc = find_cycle(g)
    assert sorted(e[2] for _, _, e in cyc) == [10, 11, 12]
    # consecutive traversals share a node and the walk closes
    for (_, b, _), (a, _, _) in zip(cyc, cyc[1:] + cyc[:1]):
        assert b == a


def test_find_cycle_parallel_edges_cancel_entry(cycle_example):
    inst, S = cycle_example
    S = S.copy()
    g = DurationMultigraph.from_schedule(S, [0, 2], 1e-9)
    cyc = find_cycle(g)
    assert len(cyc) == 2
    assert {e[2] for _, _, e in cyc} == {0, 2}
    before = count_fractional(S)
    L = aggregate_load(inst, S)
    shift, _ = cancel_cycle(S, cyc, np.ones(4), 1e-9)
    assert shift == pytest.approx(1 / 8)
    assert count_fractional(S) < before
    np.testing.assert_allclose(aggregate_load(inst, S), L, atol=1e-15)


def test_find_cycle_star_is_acyclic():
    g = DurationMultigraph(5)
    for t in range(1, 5):
        g.add_edge(0, t, 0)
    assert find_cycle(g) is None
    assert g.n_edges == 4


def test_graph_for_duration(cycle_example):
    inst, S = cycle_example
    g = graph_for_duration(inst, S, 1)
    assert g.edges() == [(0, 1, 0), (0, 1, 2), (0, 2, 2), (1, 2, 1)]


def _residual_ok(A, direction):
    A = np.asarray(A, dtype=float)
    return np.max(np.abs(A @ direction)) <= 1e-10 * max(np.max(np.abs(A)), 1e-300) * np.max(np.abs(direction))


def test_null_vector_examples():
    A = np.array([[1.0, 1.0, 1.0], [0.0, 2.0, 3.0]])
    direction = null_vector(A)
    np.testing.assert_allclose(direction / direction[0], [1, -3, 2], atol=1e-12)
    assert np.max(np.abs(direction)) == 1.0 and direction[0] > 0
    dup = np.array([[1.0, 2.0, 2.0], [4.0, 5.0, 5.0]])
    direction = null_vector(dup)
    assert _residual_ok(dup, direction)
    np.testing.assert_allclose(direction, [0, 1, -1], atol=1e-12)


@given(st.integers(0, 2**31), st.integers(2, 5))
@settings(max_examples=50, deadline=None)
def test_null_vector_random(seed, D):
    A = np.random.default_rng(seed).random((D - 1, D))
    direction = null_vector(A)
    assert _residual_ok(A, direction)
    assert np.max(np.abs(direction)) == pytest.approx(1.0)
    assert direction[np.flatnonzero(direction)[0]] > 0


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_null_vector_backend_parity():
    rng = np.random.default_rng(3)
    c = _kernels.load("cython")
    for _ in range(20):
        A = rng.random((3, 4))
        np.testing.assert_allclose(c.null_vector(A), null_vector(A), atol=1e-14)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
@pytest.mark.parametrize("shape", list(ShapeKind))
@pytest.mark.parametrize("seed", range(4))
def test_backend_parity(shape, seed):
    inst, S = _relaxed(40, 12, shape, seed)
    py = adjust(inst, S, kernels=_kernels.load("python"))
    cy = adjust(inst, S, kernels=_kernels.load("cython"))
    np.testing.assert_array_equal(py[0], cy[0])
    assert py[1].iterations == cy[1].iterations


@pytest.mark.parametrize("shape", list(ShapeKind))
@pytest.mark.parametrize("seed", range(3))
def test_per_iteration_invariants(shape, seed, kernels):
    inst, S = _relaxed(25, 10, shape, seed)
    algo = adjust_rectangular if shape is ShapeKind.RECTANGULAR else adjust_realistic
    L0 = aggregate_load(inst, S)
    scale = np.max(np.abs(L0))
    cur, steps = S, 0
    while True:
        nxt, rep = algo(inst, cur, max_iter=1, kernels=kernels)
        if rep.iterations == 0:
            break
        steps += 1
        L_prev, L_next = aggregate_load(inst, cur), aggregate_load(inst, nxt)
        assert np.max(np.abs(L_next - L_prev)) <= 1e-10 * scale
        assert count_fractional(nxt) < count_fractional(cur)
        assert check_feasibility(inst, nxt) == []
        cur = nxt
    J, T = inst.n_jobs, inst.horizon
    assert steps <= (J * T if shape is ShapeKind.RECTANGULAR else J * T * T)
    np.testing.assert_allclose(aggregate_load(inst, cur), L0, atol=1e-8)


def test_pair_updates_take_positive_steps():
    inst, S = _relaxed(40, 12, ShapeKind.REALISTIC, 9)
    _, rep = adjust_realistic(inst, S, trace=True)
    assert rep.trace
    assert all(step.shift > 0 for step in rep.trace)
    assert all(len(step.jobs) == inst.dmax + 1 for step in rep.trace)


@given(st.integers(0, 10**6), st.sampled_from(list(ShapeKind)), st.integers(5, 60), st.integers(4, 14))
@settings(max_examples=25, deadline=None)
def test_adjustment_properties(seed, shape, J, T):
    inst, S = _relaxed(J, T, shape, seed)
    A, rep = adjust(inst, S)
    LR, LA = aggregate_load(inst, S), aggregate_load(inst, A)
    assert np.max(np.abs(LA - LR)) <= 1e-8
    base = inst.cost.total(LR)
    assert abs(inst.cost.total(LA) - base) <= 1e-8 * max(1.0, base)
    assert check_feasibility(inst, A) == []
    d, T = inst.dmax, inst.horizon
    limit = 2 * d * T if shape is ShapeKind.RECTANGULAR else d * T * (T - 1)
    assert rep.fractional_after <= limit
    assert rep.fractional_after <= rep.fractional_before
