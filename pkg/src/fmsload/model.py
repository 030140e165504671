"""Assignment evaluation, feasibility rules and the linearized 0-1 program.

An :class:`Assignment` picks one (machine, tool) option per operation.  From
it we derive machine loads, the pairwise unbalance, movement counts and the
weighted objective ``w1 * total_time + w2 * unbalance``.  The same rules are
also emitted as an explicit :class:`LinearModel` (absolute values replaced by
deviation variable pairs) which can be written out in free MPS format.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence, Union

from .instance import Instance, ProcessingOption

__all__ = [
    "Weights",
    "ModelOptions",
    "Assignment",
    "AssignmentError",
    "Metrics",
    "ConstraintViolation",
    "LinExpr",
    "Variable",
    "Constraint",
    "LinearModel",
    "weighted_objective",
    "machine_loads",
    "unbalance",
    "max_load_gap",
    "movements",
    "tool_placement",
    "evaluate",
    "check_feasibility",
    "linearize_abs",
    "machine_pairs",
    "build_model",
    "model_values",
    "export_mps",
]


@dataclass(frozen=True)
class Weights:
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("weights must be non-negative")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {self.w1} + {self.w2}")


@dataclass(frozen=True)
class ModelOptions:
    """Switches for the constraints that are not part of the core equations."""

    tool_life: bool = True
    magazine: bool = True


def weighted_objective(w1: float, w2: float, total_time: int, unbalance_l: int) -> float:
    # kernels evaluate the identical expression so float results agree bit for bit
    return w1 * total_time + w2 * unbalance_l


class AssignmentError(ValueError):
    pass


@dataclass(frozen=True, eq=True)
class Assignment:
    """Map ``(part, op) -> (machine, tool)``."""

    choice: Mapping[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "choice", dict(sorted(self.choice.items())))

    def __getitem__(self, key: tuple[int, int]) -> tuple[int, int]:
        return self.choice[key]

    def __len__(self) -> int:
        return len(self.choice)

    def items(self):
        return self.choice.items()

    def to_list(self) -> list[dict]:
        return [{"part": i, "op": j, "machine": m, "tool": l} for (i, j), (m, l) in self.choice.items()]

    @classmethod
    def from_list(cls, rows: Iterable[Mapping]) -> "Assignment":
        return cls({(r["part"], r["op"]): (r["machine"], r["tool"]) for r in rows})


def _resolve(inst: Instance, a: Assignment) -> list[tuple[int, int, ProcessingOption]]:
    out = []
    for i, j, od in inst.iter_operations():
        if (i, j) not in a.choice:
            raise AssignmentError(f"part {i} op {j} is unassigned")
        m, l = a.choice[(i, j)]
        for o in od.options:
            if o.machine == m and o.tool == l:
                out.append((i, j, o))
                break
        else:
            raise AssignmentError(f"part {i} op {j}: (machine {m}, tool {l}) is not an option")
    extra = set(a.choice) - {(i, j) for i, j, _ in out}
    if extra:
        raise AssignmentError(f"assignment references unknown operations {sorted(extra)}")
    return out


def machine_loads(inst: Instance, a: Assignment) -> tuple[int, ...]:
    loads = [0] * inst.machines
    for _, _, o in _resolve(inst, a):
        loads[o.machine - 1] += o.time
    return tuple(loads)


def unbalance(loads: Sequence[int]) -> int:
    """Sum of absolute load differences over unordered machine pairs."""
    if len(loads) == 0:
        raise ValueError("loads must be non-empty")
    # sorted form: sum_k (2k - M - 1) * x_(k), k = 1..M
    s = sorted(loads)
    n = len(s)
    return sum((2 * k - n + 1) * v for k, v in enumerate(s))


def max_load_gap(loads: Sequence[int]) -> int:
    return max(loads) - min(loads)


def movements(inst: Instance, a: Assignment, part: int) -> int:
    """Number of consecutive operation pairs of ``part`` on different machines.

    Computed as the half-sum of machine-indicator differences, which is the
    same count.
    """
    chosen = {(i, j): o.machine for i, j, o in _resolve(inst, a)}
    p = inst.part(part)
    total = 0
    for j in range(1, len(p.operations)):
        m1, m2 = chosen[(part, j)], chosen[(part, j + 1)]
        total += sum(abs((m1 == m) - (m2 == m)) for m in range(1, inst.machines + 1))
    return total // 2


def tool_placement(inst: Instance, a: Assignment) -> dict[int, set[int]]:
    """Machines each used tool is needed on; more than one is a violation."""
    placed: dict[int, set[int]] = defaultdict(set)
    for _, _, o in _resolve(inst, a):
        placed[o.tool].add(o.machine)
    return dict(sorted(placed.items()))


@dataclass(frozen=True)
class Metrics:
    f1_total_time: int
    loads: tuple[int, ...]
    unbalance_l: int
    weighted_z: float
    processing_cost: int
    setup_cost: int
    movements: tuple[int, ...]
    part_time: tuple[int, ...]
    max_load: int
    max_load_gap: int
    machine_cost: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "f1_total_time": self.f1_total_time,
            "loads": list(self.loads),
            "unbalance_l": self.unbalance_l,
            "weighted_z": self.weighted_z,
            "processing_cost": self.processing_cost,
            "setup_cost": self.setup_cost,
            "movements": list(self.movements),
            "part_time": list(self.part_time),
            "max_load": self.max_load,
            "max_load_gap": self.max_load_gap,
            "machine_cost": list(self.machine_cost),
        }


def evaluate(inst: Instance, a: Assignment, w: Weights = Weights()) -> Metrics:
    chosen = _resolve(inst, a)
    loads = [0] * inst.machines
    mcost = [0] * inst.machines
    part_time = [0] * inst.n_parts
    for i, _, o in chosen:
        loads[o.machine - 1] += o.time
        mcost[o.machine - 1] += o.cost
        part_time[i - 1] += o.time
    mv = tuple(movements(inst, a, p.id) for p in inst.parts)
    f1 = sum(loads)
    ub = unbalance(loads)
    return Metrics(
        f1_total_time=f1,
        loads=tuple(loads),
        unbalance_l=ub,
        weighted_z=weighted_objective(w.w1, w.w2, f1, ub),
        processing_cost=sum(mcost),
        setup_cost=sum(n * p.setup_cost for n, p in zip(mv, inst.parts)),
        movements=mv,
        part_time=tuple(part_time),
        max_load=max(loads),
        max_load_gap=max_load_gap(loads),
        machine_cost=tuple(mcost),
    )


@dataclass(frozen=True)
class ConstraintViolation:
    rule: str
    entity: Optional[int] = None
    detail: str = ""

    def __str__(self) -> str:
        ent = "" if self.entity is None else f"({self.entity})"
        return f"{self.rule}{ent}" + (f": {self.detail}" if self.detail else "")


def check_feasibility(inst: Instance, a: Assignment, options: ModelOptions = ModelOptions()) -> list[ConstraintViolation]:
    """Every rule :func:`build_model` imposes, checked directly on ``a``."""
    out: list[ConstraintViolation] = []
    try:
        chosen = _resolve(inst, a)
    except AssignmentError as exc:
        return [ConstraintViolation("InvalidAssignment", None, str(exc))]

    loads = [0] * inst.machines
    part_time = [0] * inst.n_parts
    tool_time = [0] * inst.tools
    cost = 0
    placed: dict[int, set[int]] = defaultdict(set)
    for i, _, o in chosen:
        loads[o.machine - 1] += o.time
        part_time[i - 1] += o.time
        tool_time[o.tool - 1] += o.time
        cost += o.cost
        placed[o.tool].add(o.machine)

    S = inst.max_completion_time
    if S is not None:
        for m, ld in enumerate(loads, start=1):
            if ld > S:
                out.append(ConstraintViolation("MaxCompletionExceeded", m, f"load {ld} > {S}"))
    for p, t in zip(inst.parts, part_time):
        if t > p.due_date:
            out.append(ConstraintViolation("DueDateExceeded", p.id, f"{t} > {p.due_date}"))
    for l, ms in sorted(placed.items()):
        if len(ms) > 1:
            out.append(ConstraintViolation("ToolOnTwoMachines", l, f"machines {sorted(ms)}"))
    if cost > inst.total_cost_budget:
        out.append(ConstraintViolation("CostBudgetExceeded", None, f"{cost} > {inst.total_cost_budget}"))
    setup = sum(movements(inst, a, p.id) * p.setup_cost for p in inst.parts)
    if setup > inst.setup_cost_budget:
        out.append(ConstraintViolation("SetupBudgetExceeded", None, f"{setup} > {inst.setup_cost_budget}"))
    if options.tool_life:
        for l, t in enumerate(tool_time, start=1):
            if t > inst.tool_life[l - 1]:
                out.append(ConstraintViolation("ToolLifeExceeded", l, f"{t} > {inst.tool_life[l - 1]}"))
    if options.magazine:
        per_machine = [0] * inst.machines
        for l, ms in placed.items():
            for m in ms:
                per_machine[m - 1] += 1
        for m, n in enumerate(per_machine, start=1):
            if n > inst.magazine_capacity[m - 1]:
                out.append(ConstraintViolation("MagazineExceeded", m, f"{n} tools > {inst.magazine_capacity[m - 1]} slots"))
    return out


# --------------------------------------------------------------------------
# linear model

Number = Union[int, float]


@dataclass(frozen=True)
class LinExpr:
    coeffs: Mapping[str, Number] = field(default_factory=dict)
    const: Number = 0

    @classmethod
    def of(cls, value: Union["LinExpr", Number, Mapping[str, Number]]) -> "LinExpr":
        if isinstance(value, LinExpr):
            return value
        if isinstance(value, Mapping):
            return cls(dict(value))
        return cls({}, value)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "continuous"
    objective: Number = 0


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: Mapping[str, Number]
    sense: str  # "<=", "=", ">="
    rhs: Number


@dataclass(frozen=True)
class LinearModel:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    sense: str = "minimize"

    def variable_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def count(self, prefix: str) -> int:
        """Number of constraints whose name starts with ``prefix + '_'`` (or equals it)."""
        return sum(1 for c in self.constraints if c.name == prefix or c.name.startswith(prefix + "_"))

    def objective_value(self, values: Mapping[str, Number]) -> float:
        return sum(v.objective * values.get(v.name, 0) for v in self.variables)

    def violated(self, values: Mapping[str, Number], tol: float = 0.0) -> list[str]:
        """Names of constraints not satisfied by ``values`` (missing names read as 0)."""
        bad = []
        for c in self.constraints:
            lhs = sum(coef * values.get(n, 0) for n, coef in c.coeffs.items())
            ok = (lhs <= c.rhs + tol) if c.sense == "<=" else (lhs >= c.rhs - tol) if c.sense == ">=" else abs(lhs - c.rhs) <= tol
            if not ok:
                bad.append(c.name)
        for v in self.variables:
            x = values.get(v.name, 0)
            if x < -tol or (v.kind == "binary" and x not in (0, 1)):
                bad.append(v.name)
        return bad

    def as_arrays(self):
        """Dense ``(c, A, lb, ub, integrality)`` with row bounds, for scipy's ``milp``."""
        import numpy as np

        col = {v.name: k for k, v in enumerate(self.variables)}
        c = np.array([float(v.objective) for v in self.variables])
        A = np.zeros((len(self.constraints), len(self.variables)))
        lb = np.full(len(self.constraints), -np.inf)
        ub = np.full(len(self.constraints), np.inf)
        for r, con in enumerate(self.constraints):
            for n, coef in con.coeffs.items():
                A[r, col[n]] += coef
            if con.sense in ("<=", "="):
                ub[r] = con.rhs
            if con.sense in (">=", "="):
                lb[r] = con.rhs
        integrality = np.array([1 if v.kind == "binary" else 0 for v in self.variables])
        return c, A, lb, ub, integrality


def linearize_abs(
    pair_expressions: Sequence[tuple],
    names: Optional[Sequence[str]] = None,
    *,
    plus_prefix: str = "dp",
    minus_prefix: str = "dm",
    row_prefix: str = "DEV",
    weight: Number = 1,
) -> tuple[list[Variable], list[Constraint], dict[str, Number]]:
    """Replace ``|left - right|`` terms by deviation pairs.

    For pair ``k`` emits continuous ``dp_k, dm_k >= 0``, the row
    ``left - right - dp_k + dm_k = 0`` and objective terms ``weight * (dp_k +
    dm_k)``.  The product ``dp_k * dm_k = 0`` is not imposed; minimisation
    drives one of the two to zero by itself.
    """
    if names is None:
        names = [str(k) for k in range(1, len(pair_expressions) + 1)]
    variables: list[Variable] = []
    rows: list[Constraint] = []
    objective: dict[str, Number] = {}
    for key, (left, right) in zip(names, pair_expressions):
        left, right = LinExpr.of(left), LinExpr.of(right)
        dp, dm = f"{plus_prefix}_{key}", f"{minus_prefix}_{key}"
        coeffs: dict[str, Number] = defaultdict(int)
        for n, c in left.coeffs.items():
            coeffs[n] += c
        for n, c in right.coeffs.items():
            coeffs[n] -= c
        coeffs = {n: c for n, c in coeffs.items() if c != 0}
        coeffs[dp] = -1
        coeffs[dm] = 1
        rows.append(Constraint(f"{row_prefix}_{key}", coeffs, "=", right.const - left.const))
        variables.append(Variable(dp, "continuous", weight))
        variables.append(Variable(dm, "continuous", weight))
        objective[dp] = weight
        objective[dm] = weight
    return variables, rows, objective


def machine_pairs(n_machines: int) -> list[tuple[int, int]]:
    """Unordered machine pairs ``(m, n)``, ``m < n``; pair ``k`` is entry ``k - 1``."""
    return list(combinations(range(1, n_machines + 1), 2))


def _xname(i: int, j: int, o: ProcessingOption) -> str:
    return f"x_{i}_{j}_{o.machine}_{o.tool}"


def build_model(inst: Instance, w: Weights = Weights(), options: ModelOptions = ModelOptions()) -> LinearModel:
    """The linearized 0-1 program for ``inst``.

    Row families (name prefixes): ``ASGN`` one option per operation, ``MAXC``
    machine load cap (only when the instance sets one), ``DUE`` part time vs
    due date, ``TOOL`` each tool on at most one machine, ``COST`` processing
    budget, ``SETUP`` setup budget, ``LINK`` option use implies tool placement,
    ``LIFE`` tool life, ``MAG`` magazine slots, ``DEV`` machine-pair load
    deviations, ``MOVDEV``/``MOVUB`` machine-change indicators.
    """
    if inst.stages != 1:
        raise ValueError("multi-stage instances are not supported (stages must be 1)")

    xs: list[tuple[int, int, ProcessingOption, str]] = [
        (i, j, o, _xname(i, j, o)) for i, j, od in inst.iter_operations() for o in od.options
    ]
    pairs_ml = sorted({(o.machine, o.tool) for _, _, o, _ in xs})
    tools_used = sorted({l for _, l in pairs_ml})

    variables = [Variable(n, "binary", w.w1 * o.time) for _, _, o, n in xs]
    variables += [Variable(f"X_{m}_{l}", "binary", 0) for m, l in pairs_ml]
    rows: list[Constraint] = []

    for i, j, od in inst.iter_operations():
        rows.append(Constraint(f"ASGN_{i}_{j}", {_xname(i, j, o): 1 for o in od.options}, "=", 1))

    load_expr: dict[int, dict[str, int]] = {m: {} for m in range(1, inst.machines + 1)}
    for _, _, o, n in xs:
        load_expr[o.machine][n] = o.time
    if inst.max_completion_time is not None:
        for m in range(1, inst.machines + 1):
            rows.append(Constraint(f"MAXC_{m}", load_expr[m], "<=", inst.max_completion_time))

    for p in inst.parts:
        coeffs = {n: o.time for i, _, o, n in xs if i == p.id}
        rows.append(Constraint(f"DUE_{p.id}", coeffs, "<=", p.due_date))

    for l in tools_used:
        rows.append(Constraint(f"TOOL_{l}", {f"X_{m}_{t}": 1 for m, t in pairs_ml if t == l}, "<=", 1))

    rows.append(Constraint("COST", {n: o.cost for _, _, o, n in xs if o.cost != 0}, "<=", inst.total_cost_budget))

    # machine-change indicators: |on(m, op j) - on(m, op j+1)| per machine
    mov_exprs, mov_names, mov_weight = [], [], {}
    for p in inst.parts:
        for j in range(1, len(p.operations)):
            a_ops, b_ops = p.operations[j - 1].options, p.operations[j].options
            for m in sorted({o.machine for o in a_ops} | {o.machine for o in b_ops}):
                left = {_xname(p.id, j, o): 1 for o in a_ops if o.machine == m}
                right = {_xname(p.id, j + 1, o): 1 for o in b_ops if o.machine == m}
                mov_exprs.append((left, right))
                mov_names.append(f"{p.id}_{j}_{m}")
                mov_weight[f"{p.id}_{j}_{m}"] = p.setup_cost
    mov_vars, mov_rows, _ = linearize_abs(mov_exprs, mov_names, plus_prefix="mp", minus_prefix="mm",
                                          row_prefix="MOVDEV", weight=0)
    setup = {}
    for key, sc in mov_weight.items():
        if sc != 0:
            setup[f"mp_{key}"] = sc
            setup[f"mm_{key}"] = sc
    # sum_i SC_i * N_i <= SC with N_i = half the indicator deviations; doubled to stay integral
    rows.append(Constraint("SETUP", setup, "<=", 2 * inst.setup_cost_budget))

    for i, j, o, n in xs:
        rows.append(Constraint(f"LINK_{i}_{j}_{o.machine}_{o.tool}", {n: 1, f"X_{o.machine}_{o.tool}": -1}, "<=", 0))

    if options.tool_life:
        for l in tools_used:
            coeffs = {n: o.time for _, _, o, n in xs if o.tool == l}
            rows.append(Constraint(f"LIFE_{l}", coeffs, "<=", inst.tool_life[l - 1]))
    if options.magazine:
        for m in range(1, inst.machines + 1):
            coeffs = {f"X_{mm}_{l}": 1 for mm, l in pairs_ml if mm == m}
            if coeffs:
                rows.append(Constraint(f"MAG_{m}", coeffs, "<=", inst.magazine_capacity[m - 1]))

    pairs = machine_pairs(inst.machines)
    dev_vars, dev_rows, _ = linearize_abs(
        [(load_expr[m], load_expr[n]) for m, n in pairs], weight=w.w2)
    rows += dev_rows
    rows += mov_rows
    for key in mov_names:
        rows.append(Constraint(f"MOVUB_{key}", {f"mp_{key}": 1, f"mm_{key}": 1}, "<=", 1))

    variables += dev_vars + mov_vars
    return LinearModel(tuple(variables), tuple(rows))


def model_values(inst: Instance, a: Assignment) -> dict[str, int]:
    """Variable values of :func:`build_model` induced by a complete assignment.

    Placement variables take their minimal consistent value and every
    deviation pair is split canonically (``min(dp, dm) == 0``).
    """
    chosen = _resolve(inst, a)
    values: dict[str, int] = {}
    for i, j, od in inst.iter_operations():
        for o in od.options:
            values[_xname(i, j, o)] = 0
    for i, j, o in chosen:
        values[_xname(i, j, o)] = 1
        values[f"X_{o.machine}_{o.tool}"] = 1
    loads = machine_loads(inst, a)
    for k, (m, n) in enumerate(machine_pairs(inst.machines), start=1):
        d = loads[m - 1] - loads[n - 1]
        values[f"dp_{k}"] = max(d, 0)
        values[f"dm_{k}"] = max(-d, 0)
    on = {(i, j): o.machine for i, j, o in chosen}
    for p in inst.parts:
        for j in range(1, len(p.operations)):
            ms = {o.machine for o in p.operations[j - 1].options} | {o.machine for o in p.operations[j].options}
            for m in ms:
                d = int(on[(p.id, j)] == m) - int(on[(p.id, j + 1)] == m)
                values[f"mp_{p.id}_{j}_{m}"] = max(d, 0)
                values[f"mm_{p.id}_{j}_{m}"] = max(-d, 0)
    return values


def _num(v: Number) -> str:
    if isinstance(v, int) or float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def export_mps(model: LinearModel, name: str = "FMSLOAD") -> str:
    """Free-format MPS text.  Output depends only on the model contents."""
    sense_code = {"<=": "L", "=": "E", ">=": "G"}
    lines = [f"NAME {name}", "ROWS", " N OBJ"]
    for c in model.constraints:
        lines.append(f" {sense_code[c.sense]} {c.name}")

    entries: dict[str, list[tuple[str, Number]]] = {v.name: [] for v in model.variables}
    for v in model.variables:
        if v.objective != 0:
            entries[v.name].append(("OBJ", v.objective))
    for c in model.constraints:
        for n, coef in c.coeffs.items():
            if coef != 0:
                entries[n].append((c.name, coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for v in model.variables:
        is_int = v.kind == "binary"
        if is_int != in_int:
            lines.append(f"    M{marker} 'MARKER' '{'INTORG' if is_int else 'INTEND'}'")
            marker += 1
            in_int = is_int
        col = entries[v.name] or [("OBJ", 0)]
        for row, coef in col:
            lines.append(f"    {v.name} {row} {_num(coef)}")
    if in_int:
        lines.append(f"    M{marker} 'MARKER' 'INTEND'")

    lines.append("RHS")
    for c in model.constraints:
        if c.rhs != 0:
            lines.append(f"    RHS {c.name} {_num(c.rhs)}")
    lines.append("BOUNDS")
    for v in model.variables:
        lines.append(f" {'BV' if v.kind == 'binary' else 'PL'} BND {v.name}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
