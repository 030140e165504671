import itertools
import math
import random

import numpy as np
import pytest

from fmsload import _kernels
from fmsload.instance import from_rows
from fmsload.model import (
    Assignment,
    ModelOptions,
    Weights,
    build_model,
    check_feasibility,
    evaluate,
    model_values,
)
from fmsload.solver import (
    FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    UNKNOWN,
    SearchSpaceTooLarge,
    SolveResult,
    SolverConfig,
    branch_order,
    greedy_assignment,
    lower_bound,
    ranked_options,
    solve,
    solve_exhaustive,
)

from conftest import small_instance

WEIGHTS = [Weights(0.5, 0.5), Weights(0.2, 0.8), Weights(0.9, 0.1), Weights(1.0, 0.0), Weights(0.0, 1.0)]


def test_oracle_equivalence_on_random_instances():
    statuses = set()
    for seed in range(150):
        inst = small_instance(seed)
        w = WEIGHTS[seed % len(WEIGHTS)]
        a = solve(inst, w)
        b = solve_exhaustive(inst, w)
        assert a.status == b.status, seed
        statuses.add(a.status)
        if a.status == OPTIMAL:
            assert a.objective == b.objective
            assert a.assignment == b.assignment
            assert check_feasibility(inst, a.assignment) == []
            assert check_feasibility(inst, b.assignment) == []
        else:
            assert a.assignment is None and b.assignment is None
    assert statuses == {OPTIMAL, INFEASIBLE}


@pytest.mark.skipif(_kernels.enumerate_nb is None, reason="numba backend unavailable")
def test_enumeration_backends_agree():
    for seed in range(60):
        inst = small_instance(1000 + seed)
        a = solve_exhaustive(inst, backend="numba")
        b = solve_exhaustive(inst, backend="numpy")
        assert (a.status, a.objective, a.assignment) == (b.status, b.objective, b.assignment)
        assert a.proof["feasible"] == b.proof["feasible"]


def test_optimal_results_map_to_complementary_deviations():
    for seed in range(40):
        inst = small_instance(seed)
        res = solve(inst)
        if res.status != OPTIMAL:
            continue
        model = build_model(inst)
        vals = model_values(inst, res.assignment)
        assert model.violated(vals) == []
        for v in model.variables:
            if v.name.startswith("dp_"):
                assert min(vals[v.name], vals["dm_" + v.name[3:]]) == 0


# --------------------------------------------------------------------------
# lower bound

def _all_assignments(inst):
    keys = [(i, j) for i, j, _ in inst.iter_operations()]
    opts = [[(o.machine, o.tool) for o in od.options] for _, _, od in inst.iter_operations()]
    for combo in itertools.product(*opts):
        yield Assignment(dict(zip(keys, combo)))


def test_lower_bound_admissible_and_monotone():
    rng = random.Random(11)
    checked = 0
    seed = 0
    while checked < 1200:
        inst = small_instance(2000 + seed)
        seed += 1
        if inst.search_space_size() > 3000:
            continue
        w = WEIGHTS[seed % len(WEIGHTS)]
        feasible = [(a, evaluate(inst, a, w).weighted_z) for a in _all_assignments(inst)
                    if check_feasibility(inst, a) == []]
        order = branch_order(inst)
        for _ in range(6):
            path = {}
            prev = -math.inf
            for k in range(len(order) + 1):
                partial = Assignment(dict(path))
                lb = lower_bound(inst, partial, w)
                assert lb >= prev - 1e-9
                prev = lb
                best = min((z for a, z in feasible if all(a[key] == path[key] for key in path)), default=math.inf)
                assert lb <= best + 1e-9
                checked += 1
                if k == len(order):
                    assert lb == pytest.approx(evaluate(inst, partial, w).weighted_z, abs=1e-9)
                    break
                key = order[k]
                o = rng.choice(inst.operation(*key).options)
                path[key] = (o.machine, o.tool)
    assert checked >= 1000


def test_lower_bound_of_complete_assignment_is_exact(paper, paper_result):
    assert lower_bound(paper, paper_result.assignment) == paper_result.objective


def test_lower_bound_of_empty_with_identical_times():
    rows = [(i, j, m, 1, 7, 0) for i in (1, 2) for j in (1, 2) for m in (1, 2, 3)]
    inst = from_rows(rows, machines=3, tools=1, due_dates=[100, 100], setup_costs=[0, 0])
    w = Weights(0.5, 0.5)
    assert lower_bound(inst, Assignment({}), w) == pytest.approx(0.5 * 7 * 4)


def test_waterfill_bound_reaches_balance():
    loads = np.array([10, 0, 0], np.int64)
    # 20 units fill both empty machines up to 10
    assert _kernels.waterfill_bound(loads, 10, 20, 20, 0.5, 0.5) == pytest.approx(0.5 * 30)
    assert _kernels.waterfill_bound(loads, 10, 5, 5, 0.5, 0.5) == pytest.approx(0.5 * 15 + 0.5 * 15)


# --------------------------------------------------------------------------
# small cases

def test_forced_assignment():
    inst = from_rows([(1, 1, 1, 1, 5, 0), (1, 2, 2, 2, 6, 0), (2, 1, 2, 2, 4, 0)],
                     machines=2, tools=2, due_dates=[20, 20], setup_costs=[1, 1])
    res = solve(inst)
    assert res.status == OPTIMAL
    assert res.assignment == Assignment({(1, 1): (1, 1), (1, 2): (2, 2), (2, 1): (2, 2)})


def test_single_machine_misses_due_date():
    inst = from_rows([(1, 1, 1, 1, 5, 0), (1, 2, 1, 1, 6, 0)], machines=1, tools=1, due_dates=[10], setup_costs=[0])
    assert solve(inst).status == INFEASIBLE
    ex = solve_exhaustive(inst)
    assert ex.status == INFEASIBLE and ex.assignment is None


def test_exactly_one_feasible_assignment():
    rows = [(1, 1, 1, 1, 5, 0), (1, 1, 2, 1, 5, 9), (2, 1, 1, 2, 5, 0), (2, 1, 2, 2, 5, 9)]
    inst = from_rows(rows, machines=2, tools=2, due_dates=[10, 10], setup_costs=[0, 0], total_cost_budget=0)
    expected = Assignment({(1, 1): (1, 1), (2, 1): (1, 2)})
    assert solve_exhaustive(inst).assignment == expected
    assert solve(inst).assignment == expected
    assert solve_exhaustive(inst).proof["feasible"] == 1


def test_ties_resolve_to_first_ranked_option():
    rows = [(1, 1, 2, 1, 5, 0), (1, 1, 1, 1, 5, 0)]
    inst = from_rows(rows, machines=2, tools=1, due_dates=[10], setup_costs=[0])
    assert [(o.machine, o.tool) for o in ranked_options(inst, 1, 1)] == [(1, 1), (2, 1)]
    assert solve(inst).assignment[(1, 1)] == (1, 1)
    assert solve_exhaustive(inst).assignment[(1, 1)] == (1, 1)


def test_branch_order_is_fail_first():
    rows = [(1, 1, 1, 1, 5, 0), (1, 1, 2, 1, 9, 0), (1, 2, 1, 2, 3, 0), (2, 1, 2, 2, 8, 0)]
    inst = from_rows(rows, machines=2, tools=2, due_dates=[50, 50], setup_costs=[0, 0])
    assert branch_order(inst) == [(2, 1), (1, 2), (1, 1)]


def test_options_are_respected(paper):
    relaxed = solve(paper, options=ModelOptions(tool_life=False))
    assert relaxed.status == OPTIMAL
    assert relaxed.objective <= solve(paper).objective
    assert check_feasibility(paper, relaxed.assignment, ModelOptions(tool_life=False)) == []


# --------------------------------------------------------------------------
# limits, determinism, serialization

def test_determinism_across_workers(paper):
    base = solve(paper)
    for workers in (2, 4):
        other = solve(paper, cfg=SolverConfig(workers=workers))
        assert (other.status, other.objective, other.assignment) == (base.status, base.objective, base.assignment)
    for seed in range(30):
        inst = small_instance(seed)
        a, b = solve(inst), solve(inst, cfg=SolverConfig(workers=3))
        assert (a.status, a.assignment) == (b.status, b.assignment)


def test_repeat_runs_are_identical(paper):
    assert solve(paper).to_dict() == solve(paper).to_dict()


def test_node_limit_surfaces_as_feasible_or_unknown(paper):
    res = solve(paper, cfg=SolverConfig(node_limit=5))
    assert res.status in (FEASIBLE, UNKNOWN)
    assert res.proof["limit_hit"]
    if res.assignment is not None:
        assert check_feasibility(paper, res.assignment) == []


def test_node_limit_with_greedy_incumbent():
    rows = [(i, j, m, m, 3 + i + j + m, 0) for i in (1, 2, 3) for j in (1, 2) for m in (1, 2, 3)]
    inst = from_rows(rows, machines=3, tools=3, due_dates=[100] * 3, setup_costs=[0] * 3)
    assert greedy_assignment(inst) is not None
    res = solve(inst, cfg=SolverConfig(node_limit=1))
    assert res.status == FEASIBLE
    assert res.proof["incumbent_source"] == "greedy"


def test_config_validation():
    for kw in (dict(node_limit=0), dict(time_limit=-1.0), dict(workers=0), dict(branch_order="random")):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


def test_result_round_trip(paper, paper_result):
    doc = paper_result.to_dict()
    back = SolveResult.from_dict(doc, paper)
    assert back.assignment == paper_result.assignment
    assert back.objective == paper_result.objective
    assert back.status == paper_result.status


def test_exhaustive_cap(paper):
    with pytest.raises(SearchSpaceTooLarge):
        solve_exhaustive(paper, cap=1000)


def test_optimal_incumbent_comes_from_search():
    for seed in range(30):
        res = solve(small_instance(seed))
        if res.status == OPTIMAL:
            assert res.proof["incumbent_source"] == "search"
