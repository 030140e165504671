import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmsload.instance import RandomParams, from_rows, generate_random
from fmsload.model import Assignment, check_feasibility, machine_loads
from fmsload.schedule import (
    Schedule,
    ScheduleError,
    TimedOperation,
    build_schedule,
    due_date_warnings,
    makespan_lower_bound,
    schedule_from_dict,
    schedule_to_dict,
    verify_schedule,
)
from fmsload.solver import OPTIMAL, solve

from conftest import small_instance


def test_single_part_on_one_machine_runs_back_to_back():
    inst = from_rows([(1, 1, 1, 1, 4, 0), (1, 2, 1, 1, 6, 0), (1, 3, 1, 1, 2, 0)],
                     machines=1, tools=1, due_dates=[20], setup_costs=[0])
    s = build_schedule(inst, Assignment({(1, 1): (1, 1), (1, 2): (1, 1), (1, 3): (1, 1)}))
    assert [(t.start, t.end) for t in s.items] == [(0, 4), (4, 10), (10, 12)]
    assert s.makespan == 12
    assert s.utilization == (Fraction(1),)
    assert makespan_lower_bound(inst, Assignment({(1, 1): (1, 1), (1, 2): (1, 1), (1, 3): (1, 1)})) == 12


def test_two_parts_on_two_machines_start_together():
    inst = from_rows([(1, 1, 1, 1, 4, 0), (2, 1, 2, 2, 9, 0)], machines=2, tools=2,
                     due_dates=[10, 10], setup_costs=[0, 0])
    a = Assignment({(1, 1): (1, 1), (2, 1): (2, 2)})
    s = build_schedule(inst, a)
    assert [t.start for t in s.items] == [0, 0]
    assert s.makespan == 9
    assert makespan_lower_bound(inst, a) == 9


def test_infeasible_assignment_is_rejected():
    inst = from_rows([(1, 1, 1, 1, 4, 0), (1, 2, 1, 1, 4, 0)], machines=1, tools=1, due_dates=[5], setup_costs=[0])
    with pytest.raises(ScheduleError):
        build_schedule(inst, Assignment({(1, 1): (1, 1), (1, 2): (1, 1)}))


def _inst2():
    return from_rows([(1, 1, 1, 1, 5, 0), (1, 2, 1, 1, 5, 0), (2, 1, 1, 1, 3, 0)],
                     machines=1, tools=1, due_dates=[20, 20], setup_costs=[0, 0])


def test_overlap_is_detected():
    s = Schedule((TimedOperation(1, 1, 1, 1, 0, 5), TimedOperation(1, 2, 1, 1, 5, 10),
                  TimedOperation(2, 1, 1, 1, 8, 11)), 1)
    assert [v.rule for v in verify_schedule(_inst2(), s)] == ["MachineOverlap"]


def test_precedence_violation_is_detected():
    s = Schedule((TimedOperation(1, 1, 1, 1, 3, 8), TimedOperation(1, 2, 1, 1, 8, 13),
                  TimedOperation(2, 1, 1, 1, 0, 3)), 1)
    assert verify_schedule(_inst2(), s) == []
    s = Schedule((TimedOperation(1, 2, 1, 1, 0, 5), TimedOperation(1, 1, 1, 1, 5, 10),
                  TimedOperation(2, 1, 1, 1, 10, 13)), 1)
    assert [v.rule for v in verify_schedule(_inst2(), s)] == ["PrecedenceViolation"]


def test_duration_negative_start_and_coverage():
    s = Schedule((TimedOperation(1, 1, 1, 1, -1, 4), TimedOperation(1, 2, 1, 1, 4, 8)), 1)
    rules = {v.rule for v in verify_schedule(_inst2(), s)}
    assert rules == {"NegativeStart", "DurationMismatch", "MissingOperation"}
    s = Schedule((TimedOperation(1, 1, 1, 1, 0, 5), TimedOperation(1, 2, 1, 1, 5, 10),
                  TimedOperation(2, 1, 1, 1, 10, 13), TimedOperation(2, 1, 1, 1, 13, 16),
                  TimedOperation(3, 1, 1, 1, 16, 17)), 1)
    rules = {v.rule for v in verify_schedule(_inst2(), s)}
    assert rules == {"DuplicateOperation", "UnknownOperation"}


def test_random_feasible_assignments_schedule_validly():
    rng = random.Random(5)
    n = 0
    for seed in range(300):
        inst = small_instance(seed)
        for _ in range(5):
            a = Assignment({(i, j): (o.machine, o.tool) for i, j, od in inst.iter_operations()
                            for o in [rng.choice(od.options)]})
            if check_feasibility(inst, a):
                continue
            s = build_schedule(inst, a)
            assert verify_schedule(inst, s) == []
            assert s.makespan >= makespan_lower_bound(inst, a) >= max(machine_loads(inst, a))
            for u, load in zip(s.utilization, s.loads):
                assert u * s.makespan == load
            assert s.loads == machine_loads(inst, a)
            assert build_schedule(inst, a) == s
            n += 1
    assert n > 200


@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 4), st.integers(1, 3))
def test_schedule_property(seed, parts, ops, machines):
    inst = generate_random(RandomParams(parts, ops, machines, 5, 2), seed)
    res = solve(inst)
    if res.status != OPTIMAL:
        return
    s = build_schedule(inst, res.assignment)
    assert verify_schedule(inst, s) == []
    assert s.makespan >= makespan_lower_bound(inst, res.assignment)


def test_active_schedule_fills_idle_gap():
    # part 2 fits on machine 1 while part 1 waits for machine 2
    rows = [(1, 1, 2, 1, 5, 0), (1, 2, 1, 2, 5, 0), (2, 1, 1, 2, 3, 0)]
    inst = from_rows(rows, machines=2, tools=2, due_dates=[20, 20], setup_costs=[0, 0])
    s = build_schedule(inst, Assignment({(1, 1): (2, 1), (1, 2): (1, 2), (2, 1): (1, 2)}))
    starts = {(t.part, t.op): t.start for t in s.items}
    assert starts == {(1, 1): 0, (2, 1): 0, (1, 2): 5}


def test_serialization_round_trip(paper, paper_result):
    s = build_schedule(paper, paper_result.assignment)
    assert schedule_from_dict(schedule_to_dict(s)) == s
    with pytest.raises(ScheduleError):
        schedule_from_dict({"items": [{"part": 1}]})


def test_paper_schedule(paper, paper_result):
    s = build_schedule(paper, paper_result.assignment)
    assert len(s.items) == 16
    assert verify_schedule(paper, s) == []
    assert 303 <= s.makespan <= 1193
    assert makespan_lower_bound(paper, paper_result.assignment) >= 303
    for w in due_date_warnings(paper, s):
        assert w.completion > w.due_date
