import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrbnb.experiments import gen_regular_graph, gen_tsp
from qrbnb.problem import (
    ConstrainedQuadraticProblem,
    LinearConstraint,
    Subproblem,
    apply_penalty,
    brute_force_solve,
    evaluate,
    maxcut_to_problem,
    tsp_to_problem,
)
from qrbnb.relaxation import (
    EXACT,
    Backend,
    UndefinedGapError,
    quantumness_gap,
    relaxation_objective,
    root_relaxation,
    solve_relaxation,
)


def completion_min(sub):
    free = sub.unfixed
    best = math.inf
    for bits in itertools.product((0, 1), repeat=len(free)):
        x = [0] * sub.base.n_vars
        for i, v in sub.fixed.items():
            x[i] = v
        for i, v in zip(free, bits):
            x[i] = v
        best = min(best, evaluate(sub.base, x))
    return best


def random_qubo(n, seed):
    rng = np.random.default_rng(seed)
    quad = {(i, j): float(rng.normal()) for i in range(n) for j in range(i, n) if rng.random() < 0.5}
    return ConstrainedQuadraticProblem(n, quad)


def random_sub(problem, rng, max_fixed=None):
    n = problem.n_vars
    count = int(rng.integers(0, (max_fixed if max_fixed is not None else n) + 1))
    idx = rng.choice(n, count, replace=False)
    return Subproblem(problem, {int(i): int(rng.integers(2)) for i in idx})


def test_leaf_returns_objective():
    p = maxcut_to_problem([(0, 1), (1, 2)])
    res = solve_relaxation(Subproblem(p, {0: 1, 1: 0, 2: 1}))
    assert res.bound == evaluate(p, (1, 0, 1)) == -2
    assert res.method_used == "brute-force" and res.expectations == {}


def test_two_free_variables_use_brute_force():
    p = maxcut_to_problem([(0, 1), (1, 2)])
    res = solve_relaxation(Subproblem(p, {0: 0}))
    assert res.method_used == "brute-force"
    assert res.bound == -2
    assert res.expectations == {1: -1.0, 2: 1.0}


def test_single_edge_quantum_path():
    p = maxcut_to_problem([(0, 1)])
    res = solve_relaxation(Subproblem(p), "21", brute_force_below=0)
    assert res.bound == pytest.approx(-1.5)
    assert res.n_qubits == 2 and res.method_used == "exact"  # adjacent nodes never share a qubit


def test_brute_force_respects_feasibility():
    p = ConstrainedQuadraticProblem(3, {(0, 0): -1.0, (1, 1): -1.0, (2, 2): -1.0},
                                    (LinearConstraint({1: 1, 2: 1}, 1, tag="onehot-a"),))
    res = solve_relaxation(Subproblem(p.without_constraints(), {0: 1}), feasibility=p)
    assert res.bound == -2
    none = ConstrainedQuadraticProblem(3, {}, (LinearConstraint({1: 1, 2: 1}, 3, "equality", "c"),))
    assert solve_relaxation(Subproblem(p.without_constraints(), {0: 1}), feasibility=none).bound == math.inf


@pytest.mark.parametrize("kind", ["31", "21"])
@pytest.mark.parametrize("seed", range(6))
def test_bound_soundness_random_subproblems(kind, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 11))
    problem = random_qubo(n, seed) if seed % 2 else maxcut_to_problem(gen_regular_graph(10, 3, seed), 10)
    for _ in range(15):
        sub = random_sub(problem, rng)
        res = solve_relaxation(sub, kind)
        assert res.bound <= completion_min(sub) + 1e-8


@pytest.mark.parametrize("kind", ["31", "21"])
def test_bound_soundness_tsp(kind):
    _, d = gen_tsp(4, seed=1)
    objective = relaxation_objective(tsp_to_problem(d))
    rng = np.random.default_rng(0)
    for _ in range(10):
        sub = random_sub(objective, rng, max_fixed=8)
        assert solve_relaxation(sub, kind).bound <= completion_min(sub) + 1e-8


def test_exact_never_above_brute_force():
    # the relaxation is a lower bound, so exact path <= enumeration on the same subproblem
    for seed in range(10):
        p = random_qubo(6, seed)
        sub = Subproblem(p, {0: 1, 1: 0, 2: 1, 3: 0})
        quantum = solve_relaxation(sub, "31", brute_force_below=0).bound
        enumerated = solve_relaxation(sub, "31").bound
        assert quantum <= enumerated + 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["31", "21"]))
def test_expectations_within_unit_interval(seed, kind):
    p = random_qubo(7, seed)
    res = solve_relaxation(Subproblem(p), kind)
    assert set(res.expectations) == set(range(7))
    assert all(-1 - 1e-9 <= v <= 1 + 1e-9 for v in res.expectations.values())


def test_vqe_bound_above_exact():
    p = maxcut_to_problem(gen_regular_graph(10, 3, seed=4), 10)
    sub = Subproblem(p, {0: 1})
    exact = solve_relaxation(sub, "21").bound
    for layers in (1, 2):
        vqe = solve_relaxation(sub, "21", Backend("vqe", layers=layers, seed=3))
        assert vqe.bound >= exact - 1e-9
        assert not vqe.is_exact_bound


def test_backend_validation():
    with pytest.raises(ValueError):
        Backend("annealer")
    assert Backend("vqe", layers=2).describe() == "vqe-k2"
    assert EXACT.describe() == "exact"


def test_gap_single_edge():
    p = maxcut_to_problem([(0, 1)])
    assert root_relaxation(p, "21").bound == pytest.approx(-1.5)
    assert quantumness_gap(p, "21") == pytest.approx(1.5)


def test_gap_at_least_one():
    for seed in range(5):
        p = maxcut_to_problem(gen_regular_graph(8, 3, seed), 8)
        z, _ = brute_force_solve(p)
        for kind in ("31", "21"):
            assert quantumness_gap(p, kind, z) >= 1 - 1e-9


def test_gap_zero_optimum():
    p = ConstrainedQuadraticProblem(2, {(0, 1): 1.0})
    with pytest.raises(UndefinedGapError):
        quantumness_gap(p, "21")


def test_relaxation_objective_folds_equalities_only():
    p = ConstrainedQuadraticProblem(
        2, {}, (LinearConstraint({0: 1, 1: 1}, 1, tag="onehot-a"), LinearConstraint({0: 1}, 0, "less-equal", "cap"))
    )
    obj = relaxation_objective(p)
    assert obj.constraints == ()
    assert obj == apply_penalty(ConstrainedQuadraticProblem(2, {}, p.constraints[:1]))
