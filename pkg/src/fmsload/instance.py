"""Problem instances: data model, JSON ingestion, validation and generators.

An instance describes a batch of parts, each an ordered sequence of
operations.  Every operation lists the (machine, tool) pairs able to perform
it together with the processing time (minutes) and cost (currency units) of
doing so.  Budgets and capacities bound the admissible assignments.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterator, Optional, Sequence

__all__ = [
    "ProcessingOption",
    "OperationDef",
    "Part",
    "Instance",
    "Violation",
    "RandomParams",
    "InstanceError",
    "InstanceSyntaxError",
    "InstanceReferenceError",
    "InstanceSchemaError",
    "load_instance",
    "load_instance_file",
    "dump_instance",
    "validate",
    "paper_example",
    "generate_random",
    "PAPER_INSTANCE_FILE",
]

PAPER_INSTANCE_FILE = "paper_instance.json"


class InstanceError(ValueError):
    """Base class for instance ingestion failures."""


class InstanceSyntaxError(InstanceError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class InstanceSchemaError(InstanceError):
    """Missing field, unknown key or wrongly typed value."""


class InstanceReferenceError(InstanceError):
    """A machine or tool id lies outside the declared range."""


@dataclass(frozen=True)
class ProcessingOption:
    machine: int
    tool: int
    time: int
    cost: int
    note: str = ""


@dataclass(frozen=True)
class OperationDef:
    options: tuple[ProcessingOption, ...]


@dataclass(frozen=True)
class Part:
    id: int
    operations: tuple[OperationDef, ...]
    due_date: int
    setup_cost: int


@dataclass(frozen=True)
class Instance:
    """Immutable FMS loading instance.

    ``tool_life`` holds one entry per tool (index ``l - 1``) and
    ``magazine_capacity`` one entry per machine.  ``max_completion_time`` is
    ``None`` when no machine-load cap applies.
    """

    machines: int
    tools: int
    parts: tuple[Part, ...]
    tool_life: tuple[int, ...]
    magazine_capacity: tuple[int, ...]
    total_cost_budget: int
    setup_cost_budget: int
    max_completion_time: Optional[int] = None
    stages: int = 1
    notes: tuple[str, ...] = field(default=(), compare=True)

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    @property
    def n_operations(self) -> int:
        return sum(len(p.operations) for p in self.parts)

    def part(self, part_id: int) -> Part:
        return self.parts[part_id - 1]

    def operation(self, part_id: int, op: int) -> OperationDef:
        return self.parts[part_id - 1].operations[op - 1]

    def iter_operations(self) -> Iterator[tuple[int, int, OperationDef]]:
        """Yield ``(part_id, op_index, operation)`` in part/op order."""
        for p in self.parts:
            for j, od in enumerate(p.operations, start=1):
                yield p.id, j, od

    def search_space_size(self) -> int:
        n = 1
        for _, _, od in self.iter_operations():
            n *= len(od.options)
        return n


@dataclass(frozen=True)
class Violation:
    rule: str
    field: str
    message: str = ""

    def __str__(self) -> str:
        return f"{self.rule} at {self.field}: {self.message}" if self.message else f"{self.rule} at {self.field}"


# --------------------------------------------------------------------------
# JSON ingestion

_TOP_KEYS = {
    "machines", "tools", "tool_life", "magazine_capacity", "total_cost_budget",
    "setup_cost_budget", "max_completion_time", "stages", "parts", "notes",
}
_TOP_REQUIRED = {
    "machines", "tools", "tool_life", "magazine_capacity", "total_cost_budget",
    "setup_cost_budget", "parts",
}
_PART_KEYS = {"id", "due_date", "setup_cost", "operations"}
_OP_KEYS = {"options"}
_OPTION_KEYS = {"machine", "tool", "time", "cost", "note"}
_OPTION_REQUIRED = {"machine", "tool", "time", "cost"}


def _check_keys(obj: Any, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise InstanceSchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise InstanceSchemaError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise InstanceSchemaError(f"{where}: missing required field(s) {', '.join(missing)}")


def _int(value: Any, where: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceSchemaError(f"{where}: expected an integer, got {value!r}")
    return value


def _per_entity(value: Any, count: int, where: str) -> tuple[int, ...]:
    """Accept a scalar (broadcast) or a list with one entry per entity."""
    if isinstance(value, list):
        if len(value) != count:
            raise InstanceSchemaError(f"{where}: expected {count} entries, got {len(value)}")
        return tuple(_int(v, f"{where}[{k}]") for k, v in enumerate(value))
    return (_int(value, where),) * count


def load_instance(source: str) -> Instance:
    """Parse an instance document (JSON text).

    Raises :class:`InstanceSyntaxError` on malformed JSON,
    :class:`InstanceSchemaError` on missing/unknown/mistyped fields and
    :class:`InstanceReferenceError` for out-of-range machine or tool ids.
    Value-level rules (positive times, ...) are left to :func:`validate`.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise InstanceSyntaxError(exc.msg, exc.lineno, exc.colno) from None

    _check_keys(doc, _TOP_KEYS, _TOP_REQUIRED, "instance")
    machines = _int(doc["machines"], "machines")
    tools = _int(doc["tools"], "tools")
    if machines < 1 or tools < 1:
        raise InstanceSchemaError("machines and tools must be >= 1")
    mct = doc.get("max_completion_time")
    notes = doc.get("notes", [])
    if not isinstance(notes, list) or not all(isinstance(s, str) for s in notes):
        raise InstanceSchemaError("notes: expected a list of strings")
    if not isinstance(doc["parts"], list):
        raise InstanceSchemaError("parts: expected a list")

    parts = []
    for pi, pdoc in enumerate(doc["parts"]):
        where = f"parts[{pi}]"
        _check_keys(pdoc, _PART_KEYS, _PART_KEYS, where)
        if not isinstance(pdoc["operations"], list):
            raise InstanceSchemaError(f"{where}.operations: expected a list")
        ops = []
        for oi, odoc in enumerate(pdoc["operations"]):
            owhere = f"{where}.operations[{oi}]"
            _check_keys(odoc, _OP_KEYS, _OP_KEYS, owhere)
            if not isinstance(odoc["options"], list):
                raise InstanceSchemaError(f"{owhere}.options: expected a list")
            opts = []
            for ki, kdoc in enumerate(odoc["options"]):
                kwhere = f"{owhere}.options[{ki}]"
                _check_keys(kdoc, _OPTION_KEYS, _OPTION_REQUIRED, kwhere)
                m = _int(kdoc["machine"], kwhere + ".machine")
                t = _int(kdoc["tool"], kwhere + ".tool")
                if not 1 <= m <= machines:
                    raise InstanceReferenceError(f"{kwhere}: machine {m} out of range 1..{machines}")
                if not 1 <= t <= tools:
                    raise InstanceReferenceError(f"{kwhere}: tool {t} out of range 1..{tools}")
                note = kdoc.get("note", "")
                if not isinstance(note, str):
                    raise InstanceSchemaError(f"{kwhere}.note: expected a string")
                opts.append(ProcessingOption(
                    m, t, _int(kdoc["time"], kwhere + ".time"), _int(kdoc["cost"], kwhere + ".cost"), note))
            ops.append(OperationDef(tuple(opts)))
        parts.append(Part(
            id=_int(pdoc["id"], where + ".id"),
            operations=tuple(ops),
            due_date=_int(pdoc["due_date"], where + ".due_date"),
            setup_cost=_int(pdoc["setup_cost"], where + ".setup_cost"),
        ))

    return Instance(
        machines=machines,
        tools=tools,
        parts=tuple(parts),
        tool_life=_per_entity(doc["tool_life"], tools, "tool_life"),
        magazine_capacity=_per_entity(doc["magazine_capacity"], machines, "magazine_capacity"),
        total_cost_budget=_int(doc["total_cost_budget"], "total_cost_budget"),
        setup_cost_budget=_int(doc["setup_cost_budget"], "setup_cost_budget"),
        max_completion_time=None if mct is None else _int(mct, "max_completion_time"),
        stages=_int(doc.get("stages", 1), "stages"),
        notes=tuple(notes),
    )


def load_instance_file(path: str) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return load_instance(fh.read())


def instance_to_dict(inst: Instance) -> dict:
    doc: dict[str, Any] = {
        "machines": inst.machines,
        "tools": inst.tools,
        "tool_life": list(inst.tool_life),
        "magazine_capacity": list(inst.magazine_capacity),
        "total_cost_budget": inst.total_cost_budget,
        "setup_cost_budget": inst.setup_cost_budget,
    }
    if inst.max_completion_time is not None:
        doc["max_completion_time"] = inst.max_completion_time
    doc["stages"] = inst.stages
    if inst.notes:
        doc["notes"] = list(inst.notes)
    parts = []
    for p in inst.parts:
        ops = []
        for od in p.operations:
            opts = []
            for o in od.options:
                d = {"machine": o.machine, "tool": o.tool, "time": o.time, "cost": o.cost}
                if o.note:
                    d["note"] = o.note
                opts.append(d)
            ops.append({"options": opts})
        parts.append({"id": p.id, "due_date": p.due_date, "setup_cost": p.setup_cost, "operations": ops})
    doc["parts"] = parts
    return doc


def dump_instance(inst: Instance) -> str:
    """Serialize to the JSON instance format (inverse of :func:`load_instance`)."""
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


# --------------------------------------------------------------------------
# validation

def validate(inst: Instance) -> list[Violation]:
    out: list[Violation] = []

    def bad(rule: str, where: str, msg: str = "") -> None:
        out.append(Violation(rule, where, msg))

    if inst.machines < 1:
        bad("NonPositiveCount", "machines")
    if inst.tools < 1:
        bad("NonPositiveCount", "tools")
    if inst.stages < 1:
        bad("InvalidStages", "stages", f"{inst.stages} < 1")
    if len(inst.tool_life) != inst.tools:
        bad("LengthMismatch", "tool_life", f"{len(inst.tool_life)} entries for {inst.tools} tools")
    for l, tl in enumerate(inst.tool_life, start=1):
        if tl <= 0:
            bad("NonPositiveToolLife", f"tool_life[{l}]", str(tl))
    if len(inst.magazine_capacity) != inst.machines:
        bad("LengthMismatch", "magazine_capacity",
            f"{len(inst.magazine_capacity)} entries for {inst.machines} machines")
    for m, cap in enumerate(inst.magazine_capacity, start=1):
        if cap < 0:
            bad("NegativeMagazineCapacity", f"magazine_capacity[{m}]", str(cap))
    if inst.total_cost_budget < 0:
        bad("NegativeBudget", "total_cost_budget")
    if inst.setup_cost_budget < 0:
        bad("NegativeBudget", "setup_cost_budget")
    if inst.max_completion_time is not None and inst.max_completion_time <= 0:
        bad("NonPositiveMaxCompletion", "max_completion_time")
    if not inst.parts:
        bad("NoParts", "parts")

    for idx, p in enumerate(inst.parts, start=1):
        pw = f"part {p.id}"
        if p.id != idx:
            bad("PartIdMismatch", pw, f"expected id {idx}")
        if not p.operations:
            bad("NoOperations", pw)
        if p.due_date <= 0:
            bad("NonPositiveDueDate", pw, str(p.due_date))
        if p.setup_cost < 0:
            bad("NegativeSetupCost", pw, str(p.setup_cost))
        for j, od in enumerate(p.operations, start=1):
            ow = f"part {p.id} op {j}"
            if not od.options:
                bad("NoProcessingOption", ow)
            seen = set()
            for o in od.options:
                key = (o.machine, o.tool)
                if key in seen:
                    bad("DuplicateOption", ow, f"machine {o.machine} tool {o.tool}")
                seen.add(key)
                if not 1 <= o.machine <= inst.machines:
                    bad("MachineOutOfRange", ow, f"machine {o.machine}")
                if not 1 <= o.tool <= inst.tools:
                    bad("ToolOutOfRange", ow, f"tool {o.tool}")
                if o.time <= 0:
                    bad("NonPositiveTime", ow, f"machine {o.machine} tool {o.tool} time {o.time}")
                if o.cost < 0:
                    bad("NegativeCost", ow, f"machine {o.machine} tool {o.tool} cost {o.cost}")
    return out


# --------------------------------------------------------------------------
# built-in and generated instances

def paper_example() -> Instance:
    """The curated four-part / four-machine / twenty-tool example instance.

    Loaded from the packaged ``data/paper_instance.json``; see the ``notes``
    field of that file for how each cell of the source table was read.
    """
    text = resources.files("fmsload").joinpath("data").joinpath(PAPER_INSTANCE_FILE).read_text(encoding="utf-8")
    return load_instance(text)


@dataclass(frozen=True)
class RandomParams:
    n_parts: int
    ops_per_part: int
    n_machines: int
    n_tools: int
    options_per_op: int
    time_range: tuple[int, int] = (1, 20)
    cost_range: tuple[int, int] = (0, 10)
    # scales due dates, cost/setup budgets and tool life; 1.0 keeps them loose
    budget_factor: float = 1.0


def generate_random(params: RandomParams, seed: int) -> Instance:
    """Deterministic random instance for a given ``(params, seed)``.

    With ``budget_factor == 1`` every budget equals the sum of per-operation
    maxima, so any assignment respecting tool uniqueness meets them.
    """
    p = params
    if min(p.n_parts, p.ops_per_part, p.n_machines, p.n_tools, p.options_per_op) < 1:
        raise ValueError("all counts must be >= 1")
    if p.options_per_op > p.n_machines * p.n_tools:
        raise ValueError("options_per_op exceeds the number of (machine, tool) pairs")
    tlo, thi = p.time_range
    clo, chi = p.cost_range
    if tlo < 1 or thi < tlo:
        raise ValueError("time_range must be non-empty with a positive lower bound")
    if clo < 0 or chi < clo:
        raise ValueError("cost_range must be non-empty and non-negative")
    if p.budget_factor <= 0:
        raise ValueError("budget_factor must be positive")

    rng = random.Random(seed)
    pairs = [(m, l) for m in range(1, p.n_machines + 1) for l in range(1, p.n_tools + 1)]
    parts = []
    max_time_total = 0
    max_cost_total = 0
    setup_total = 0
    f = p.budget_factor
    for i in range(1, p.n_parts + 1):
        ops = []
        part_max = 0
        for _ in range(p.ops_per_part):
            chosen = sorted(rng.sample(pairs, p.options_per_op))
            opts = tuple(ProcessingOption(m, l, rng.randint(tlo, thi), rng.randint(clo, chi)) for m, l in chosen)
            ops.append(OperationDef(opts))
            part_max += max(o.time for o in opts)
            max_cost_total += max(o.cost for o in opts)
        max_time_total += part_max
        sc = rng.randint(clo, chi)
        setup_total += sc * (p.ops_per_part - 1)
        parts.append(Part(i, tuple(ops), max(1, int(part_max * f)), sc))
    return Instance(
        machines=p.n_machines,
        tools=p.n_tools,
        parts=tuple(parts),
        tool_life=(max(1, int(max_time_total * f)),) * p.n_tools,
        magazine_capacity=(p.n_tools,) * p.n_machines,
        total_cost_budget=int(max_cost_total * f),
        setup_cost_budget=int(setup_total * f),
    )


def from_rows(
    rows: Sequence[tuple[int, int, int, int, int, int]],
    *,
    machines: int,
    tools: int,
    due_dates: Sequence[int],
    setup_costs: Sequence[int],
    tool_life: int | Sequence[int] = 10**9,
    magazine_capacity: int | Sequence[int] = 10**9,
    total_cost_budget: int = 10**9,
    setup_cost_budget: int = 10**9,
    max_completion_time: Optional[int] = None,
) -> Instance:
    """Build an instance from ``(part, op, machine, tool, time, cost)`` rows.

    Convenience for tests and scripts; budgets default to effectively
    unlimited.
    """
    by_op: dict[tuple[int, int], list[ProcessingOption]] = {}
    for i, j, m, l, t, c in rows:
        by_op.setdefault((i, j), []).append(ProcessingOption(m, l, t, c))
    parts = []
    for i in range(1, len(due_dates) + 1):
        n_ops = max(j for (pi, j) in by_op if pi == i)
        ops = tuple(OperationDef(tuple(by_op.get((i, j), ()))) for j in range(1, n_ops + 1))
        parts.append(Part(i, ops, due_dates[i - 1], setup_costs[i - 1]))
    tl = (tool_life,) * tools if isinstance(tool_life, int) else tuple(tool_life)
    mc = (magazine_capacity,) * machines if isinstance(magazine_capacity, int) else tuple(magazine_capacity)
    return Instance(machines, tools, tuple(parts), tl, mc, total_cost_budget, setup_cost_budget,
                    max_completion_time)
