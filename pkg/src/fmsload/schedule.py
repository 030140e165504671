"""Timed schedules for a fixed assignment.

Assignment decides only which machine runs each operation; the order on each
machine comes from Giffler-Thompson active list scheduling.  Among operations
competing for the critical machine the one with the earliest possible start
wins, then the one whose part has the most work left, then the lower part id.
Setup and part movement take no time.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .instance import Instance, Violation
from .model import Assignment, ModelOptions, _resolve, check_feasibility

__all__ = [
    "TimedOperation",
    "Schedule",
    "ScheduleError",
    "DueDateWarning",
    "build_schedule",
    "verify_schedule",
    "structural_violations",
    "makespan_lower_bound",
    "due_date_warnings",
    "schedule_to_dict",
    "schedule_from_dict",
    "schedule_to_json",
]


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TimedOperation:
    part: int
    op: int
    machine: int
    tool: int
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def code(self) -> str:
        return f"{self.part}{self.op}"


@dataclass(frozen=True)
class Schedule:
    items: tuple[TimedOperation, ...]
    n_machines: int

    @property
    def makespan(self) -> int:
        return max((t.end for t in self.items), default=0)

    @property
    def loads(self) -> tuple[int, ...]:
        out = [0] * self.n_machines
        for t in self.items:
            out[t.machine - 1] += t.duration
        return tuple(out)

    @property
    def completion(self) -> tuple[int, ...]:
        """Finish time of the last operation on each machine (0 when idle)."""
        out = [0] * self.n_machines
        for t in self.items:
            out[t.machine - 1] = max(out[t.machine - 1], t.end)
        return tuple(out)

    @property
    def utilization(self) -> tuple[Fraction, ...]:
        ms = self.makespan
        if ms == 0:
            return tuple(Fraction(0) for _ in range(self.n_machines))
        return tuple(Fraction(load, ms) for load in self.loads)

    @property
    def mean_utilization(self) -> Fraction:
        u = self.utilization
        return sum(u, Fraction(0)) / len(u) if u else Fraction(0)

    def on_machine(self, machine: int) -> list[TimedOperation]:
        return sorted((t for t in self.items if t.machine == machine), key=lambda t: (t.start, t.end))


def build_schedule(inst: Instance, a: Assignment, options: ModelOptions = ModelOptions()) -> Schedule:
    bad = check_feasibility(inst, a, options)
    if bad:
        raise ScheduleError("assignment is infeasible: " + "; ".join(map(str, bad)))
    chosen = {(i, j): o for i, j, o in _resolve(inst, a)}

    n_ops = {p.id: len(p.operations) for p in inst.parts}
    nxt = {p.id: 1 for p in inst.parts}
    part_ready = {p.id: 0 for p in inst.parts}
    remaining = {p.id: sum(chosen[(p.id, j)].time for j in range(1, n_ops[p.id] + 1)) for p in inst.parts}
    mach_ready = [0] * (inst.machines + 1)
    items: list[TimedOperation] = []

    while True:
        cands = []
        for pid in sorted(nxt):
            j = nxt[pid]
            if j > n_ops[pid]:
                continue
            o = chosen[(pid, j)]
            es = max(part_ready[pid], mach_ready[o.machine])
            cands.append((es, es + o.time, pid, j, o))
        if not cands:
            break
        _, ec_star, _, _, o_star = min(cands, key=lambda c: (c[1], c[4].machine, c[2]))
        m_star = o_star.machine
        conflict = [c for c in cands if c[4].machine == m_star and c[0] < ec_star]
        es, ec, pid, j, o = min(conflict, key=lambda c: (c[0], -remaining[c[2]], c[2]))
        items.append(TimedOperation(pid, j, o.machine, o.tool, es, ec))
        mach_ready[o.machine] = ec
        part_ready[pid] = ec
        remaining[pid] -= o.time
        nxt[pid] += 1

    return Schedule(tuple(sorted(items, key=lambda t: (t.machine, t.start, t.part, t.op))), inst.machines)


def structural_violations(s: Schedule) -> list[Violation]:
    """Checks that need no instance: start times, precedence, machine overlap."""
    out: list[Violation] = []
    for t in s.items:
        where = f"part {t.part} op {t.op}"
        if t.start < 0:
            out.append(Violation("NegativeStart", where, f"starts at {t.start}"))
        if t.end < t.start:
            out.append(Violation("DurationMismatch", where, f"ends at {t.end} before start {t.start}"))
        if not 1 <= t.machine <= s.n_machines:
            out.append(Violation("MachineOutOfRange", where, f"machine {t.machine}"))

    by_part: dict[int, list[TimedOperation]] = defaultdict(list)
    for t in s.items:
        by_part[t.part].append(t)
    for pid, ops in sorted(by_part.items()):
        ops.sort(key=lambda t: t.op)
        for a, b in zip(ops, ops[1:]):
            if b.op != a.op and b.start < a.end:
                out.append(Violation("PrecedenceViolation", f"part {pid} op {b.op}",
                                     f"starts at {b.start} before op {a.op} ends at {a.end}"))

    for m in range(1, s.n_machines + 1):
        ops = s.on_machine(m)
        for a, b in zip(ops, ops[1:]):
            if b.start < a.end:
                out.append(Violation("MachineOverlap", f"machine {m}",
                                     f"{a.part}.{a.op} [{a.start},{a.end}) overlaps {b.part}.{b.op} [{b.start},{b.end})"))
    return out


def verify_schedule(inst: Instance, s: Schedule) -> list[Violation]:
    """Empty iff ``s`` covers every operation once with a valid option, in order, without overlaps."""
    out: list[Violation] = []
    if s.n_machines != inst.machines:
        out.append(Violation("MachineCountMismatch", "schedule",
                             f"{s.n_machines} lanes for {inst.machines} machines"))
    seen: dict[tuple[int, int], int] = defaultdict(int)
    for t in s.items:
        seen[(t.part, t.op)] += 1
    expected = {(i, j): od for i, j, od in inst.iter_operations()}
    for key in sorted(expected):
        if seen.get(key, 0) == 0:
            out.append(Violation("MissingOperation", f"part {key[0]} op {key[1]}"))
        elif seen[key] > 1:
            out.append(Violation("DuplicateOperation", f"part {key[0]} op {key[1]}", f"{seen[key]} times"))
    for key in sorted(set(seen) - set(expected)):
        out.append(Violation("UnknownOperation", f"part {key[0]} op {key[1]}"))

    for t in s.items:
        od = expected.get((t.part, t.op))
        if od is None:
            continue
        o = next((o for o in od.options if (o.machine, o.tool) == (t.machine, t.tool)), None)
        where = f"part {t.part} op {t.op}"
        if o is None:
            out.append(Violation("NotAnOption", where, f"(machine {t.machine}, tool {t.tool})"))
        elif t.duration != o.time:
            out.append(Violation("DurationMismatch", where, f"lasts {t.duration}, option time is {o.time}"))
    return out + structural_violations(s)


def makespan_lower_bound(inst: Instance, a: Assignment) -> int:
    chosen = _resolve(inst, a)
    loads: dict[int, int] = defaultdict(int)
    parts: dict[int, int] = defaultdict(int)
    for i, _, o in chosen:
        loads[o.machine] += o.time
        parts[i] += o.time
    return max(max(loads.values()), max(parts.values()))


@dataclass(frozen=True)
class DueDateWarning:
    part: int
    completion: int
    due_date: int

    def __str__(self) -> str:
        return f"part {self.part} completes at {self.completion}, after its due date {self.due_date}"


def due_date_warnings(inst: Instance, s: Schedule) -> list[DueDateWarning]:
    """Parts whose timed completion exceeds the due date.

    Feasibility only bounds each part's summed processing time, so waiting
    time can push completion past the due date without making the
    assignment infeasible.
    """
    done: dict[int, int] = defaultdict(int)
    for t in s.items:
        done[t.part] = max(done[t.part], t.end)
    return [DueDateWarning(p.id, done[p.id], p.due_date) for p in inst.parts if done[p.id] > p.due_date]


def schedule_to_dict(s: Schedule) -> dict:
    return {
        "n_machines": s.n_machines,
        "makespan": s.makespan,
        "utilization": [str(u) for u in s.utilization],
        "items": [
            {"part": t.part, "op": t.op, "machine": t.machine, "tool": t.tool, "start": t.start, "end": t.end}
            for t in s.items
        ],
    }


def schedule_from_dict(doc: dict) -> Schedule:
    try:
        items = tuple(
            TimedOperation(int(r["part"]), int(r["op"]), int(r["machine"]), int(r["tool"]),
                           int(r["start"]), int(r["end"]))
            for r in doc["items"]
        )
        return Schedule(items, int(doc["n_machines"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScheduleError(f"malformed schedule document: {exc}") from exc


def schedule_to_json(s: Schedule, indent: Optional[int] = 1) -> str:
    return json.dumps(schedule_to_dict(s), indent=indent) + "\n"
