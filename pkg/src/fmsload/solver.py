"""Exact minimisation of ``w1 * total_time + w2 * unbalance`` over assignments.

:func:`solve` runs a depth-first branch and bound over per-operation option
choices (deviation variables are implied by the loads and never branched on);
:func:`solve_exhaustive` enumerates every assignment and serves as its oracle.

Both break ties between equal objectives the same way: operations are visited
in *branch order* (fewest options first, then largest minimum time, then
part/op) and the options of an operation in *rank order* (time, cost,
machine, tool).  The returned optimum is the lexicographically smallest
vector of option ranks among all optimal assignments.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import _kernels as K
from .instance import Instance, ProcessingOption
from .model import (
    Assignment,
    Metrics,
    ModelOptions,
    Weights,
    check_feasibility,
    evaluate,
    machine_loads,
)

__all__ = [
    "SolverConfig",
    "SolveResult",
    "SearchSpaceTooLarge",
    "OPTIMAL",
    "FEASIBLE",
    "INFEASIBLE",
    "UNKNOWN",
    "branch_order",
    "ranked_options",
    "solve",
    "solve_exhaustive",
    "lower_bound",
    "greedy_assignment",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE = "feasible"  # a limit was hit; best is the incumbent
INFEASIBLE = "infeasible"
UNKNOWN = "unknown"  # a limit was hit before any feasible assignment was found

EXHAUSTIVE_CAP = 10**7
_SUBTREE_TARGET = 64


@dataclass(frozen=True)
class SolverConfig:
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    branch_order: str = "fail-first"
    log_every: int = 1_000_000
    workers: int = 1

    def __post_init__(self):
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node_limit must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.branch_order != "fail-first":
            raise ValueError(f"unknown branch order {self.branch_order!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SolveResult:
    status: str
    assignment: Optional[Assignment] = None
    metrics: Optional[Metrics] = None
    nodes_explored: int = 0
    proof: dict = field(default_factory=dict)

    @property
    def objective(self) -> Optional[float]:
        return None if self.metrics is None else self.metrics.weighted_z

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "assignment": None if self.assignment is None else self.assignment.to_list(),
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "nodes_explored": self.nodes_explored,
            "proof": self.proof,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict, inst: Instance, w: Weights = Weights()) -> "SolveResult":
        a = None if doc.get("assignment") is None else Assignment.from_list(doc["assignment"])
        return cls(
            status=doc["status"],
            assignment=a,
            metrics=None if a is None else evaluate(inst, a, w),
            nodes_explored=doc.get("nodes_explored", 0),
            proof=doc.get("proof", {}),
        )


class SearchSpaceTooLarge(ValueError):
    pass


# --------------------------------------------------------------------------
# array preparation

def ranked_options(inst: Instance, part: int, op: int) -> list[ProcessingOption]:
    return sorted(inst.operation(part, op).options, key=lambda o: (o.time, o.cost, o.machine, o.tool))


def branch_order(inst: Instance) -> list[tuple[int, int]]:
    """Operations sorted by (fewest options, largest minimum time, part, op)."""
    keys = []
    for i, j, od in inst.iter_operations():
        keys.append((len(od.options), -min(o.time for o in od.options), i, j))
    return [(i, j) for _, _, i, j in sorted(keys)]


@dataclass
class _Arrays:
    order: list[tuple[int, int]]
    ranked: list[list[ProcessingOption]]
    off: np.ndarray
    om: np.ndarray
    ol: np.ndarray
    ot: np.ndarray
    oc: np.ndarray
    opart: np.ndarray
    prev: np.ndarray
    nxt: np.ndarray
    mint: np.ndarray
    maxt: np.ndarray
    minc: np.ndarray
    part_ops: np.ndarray
    due: np.ndarray
    sc: np.ndarray
    life: np.ndarray
    mag: np.ndarray
    lim: np.ndarray

    def problem(self):
        return (self.off, self.om, self.ol, self.ot, self.oc, self.opart, self.prev, self.nxt,
                self.mint, self.maxt, self.minc, self.due, self.sc, self.life, self.mag, self.lim)

    def to_assignment(self, ranks) -> Assignment:
        choice = {}
        for k, (i, j) in enumerate(self.order):
            o = self.ranked[k][int(ranks[k])]
            choice[(i, j)] = (o.machine, o.tool)
        return Assignment(choice)

    def ranks_of(self, a: Assignment) -> list[int]:
        out = []
        for k, key in enumerate(self.order):
            m, l = a.choice[key]
            out.append(next(r for r, o in enumerate(self.ranked[k]) if (o.machine, o.tool) == (m, l)))
        return out


def _arrays(inst: Instance, options: ModelOptions) -> _Arrays:
    if inst.stages != 1:
        raise ValueError("multi-stage instances are not supported (stages must be 1)")
    order = branch_order(inst)
    pos = {key: k for k, key in enumerate(order)}
    ranked = [ranked_options(inst, i, j) for i, j in order]
    flat = [o for opts in ranked for o in opts]
    off = np.zeros(len(order) + 1, np.int64)
    off[1:] = np.cumsum([len(r) for r in ranked])
    i64 = lambda xs: np.asarray(xs, dtype=np.int64)
    max_ops = max(len(p.operations) for p in inst.parts)
    part_ops = np.full((inst.n_parts, max_ops), -1, np.int64)
    for p in inst.parts:
        for j in range(1, len(p.operations) + 1):
            part_ops[p.id - 1, j - 1] = pos[(p.id, j)]
    big = int(K.BIG)
    return _Arrays(
        order=order,
        ranked=ranked,
        off=off,
        om=i64([o.machine - 1 for o in flat]),
        ol=i64([o.tool - 1 for o in flat]),
        ot=i64([o.time for o in flat]),
        oc=i64([o.cost for o in flat]),
        opart=i64([i - 1 for i, _ in order]),
        prev=i64([pos.get((i, j - 1), -1) for i, j in order]),
        nxt=i64([pos.get((i, j + 1), -1) for i, j in order]),
        mint=i64([min(o.time for o in r) for r in ranked]),
        maxt=i64([max(o.time for o in r) for r in ranked]),
        minc=i64([min(o.cost for o in r) for r in ranked]),
        part_ops=part_ops,
        due=i64([p.due_date for p in inst.parts]),
        sc=i64([p.setup_cost for p in inst.parts]),
        life=i64(inst.tool_life if options.tool_life else [big] * inst.tools),
        mag=i64(inst.magazine_capacity if options.magazine else [big] * inst.machines),
        lim=i64([big if inst.max_completion_time is None else inst.max_completion_time,
                 inst.total_cost_budget, inst.setup_cost_budget]),
    )


def _check_ready(inst: Instance) -> None:
    for i, j, od in inst.iter_operations():
        if not od.options:
            raise ValueError(f"part {i} op {j} has no processing option")


# --------------------------------------------------------------------------
# public API

def lower_bound(inst: Instance, partial: Assignment, w: Weights = Weights()) -> float:
    """Admissible bound on the weighted objective of every completion of ``partial``.

    Assigned time counts exactly; each unassigned operation contributes
    between its minimum and maximum option time, treated as freely divisible
    across machines.  Exact for a complete assignment.
    """
    loads = [0] * inst.machines
    assigned = 0
    rem_min = rem_max = 0
    for i, j, od in inst.iter_operations():
        if (i, j) in partial.choice:
            m, l = partial.choice[(i, j)]
            o = next((o for o in od.options if (o.machine, o.tool) == (m, l)), None)
            if o is None:
                raise ValueError(f"part {i} op {j}: (machine {m}, tool {l}) is not an option")
            loads[m - 1] += o.time
            assigned += o.time
        else:
            rem_min += min(o.time for o in od.options)
            rem_max += max(o.time for o in od.options)
    return float(K.waterfill_bound(np.asarray(loads, np.int64), assigned, rem_min, rem_max, w.w1, w.w2))


def greedy_assignment(inst: Instance, options: ModelOptions = ModelOptions()) -> Optional[Assignment]:
    """Least-loaded-machine heuristic used to seed the search (None on a dead end)."""
    arr = _arrays(inst, options)
    ok, choice = K.greedy(inst.machines, inst.tools, *arr.problem())
    return arr.to_assignment(choice) if ok else None


def _subtree_prefixes(arr: _Arrays) -> list[tuple[int, ...]]:
    radix = np.diff(arr.off).tolist()
    depth, size = 0, 1
    while depth < len(radix) and size < _SUBTREE_TARGET:
        size *= radix[depth]
        depth += 1
    prefixes: list[tuple[int, ...]] = [()]
    for d in range(depth):
        prefixes = [p + (r,) for p in prefixes for r in range(radix[d])]
    return prefixes


def solve(inst: Instance, w: Weights = Weights(), cfg: SolverConfig = SolverConfig(),
          options: ModelOptions = ModelOptions()) -> SolveResult:
    """Branch and bound; ``status == OPTIMAL`` certifies the returned optimum.

    The tree is cut into subtrees at a shallow depth.  Subtrees run in
    lexicographic order (or concurrently with ``cfg.workers > 1``) against a
    shared, improve-only incumbent; limits are checked between subtrees and,
    for the node limit, inside them.
    """
    _check_ready(inst)
    arr = _arrays(inst, options)
    problem = arr.problem()
    t0 = time.monotonic()

    ok, gchoice = K.greedy(inst.machines, inst.tools, *problem)
    greedy_val = None
    if ok:
        ga = arr.to_assignment(gchoice)
        greedy_val = evaluate(inst, ga, w).weighted_z
    root_bound = float(K.waterfill_bound(np.zeros(inst.machines, np.int64), 0, int(arr.mint.sum()),
                                         int(arr.maxt.sum()), w.w1, w.w2))

    prefixes = _subtree_prefixes(arr)
    lock = threading.Lock()
    state: dict[str, Any] = {
        "val": math.inf if greedy_val is None else greedy_val,
        "src": math.inf,  # subtree index of the incumbent; inf = greedy seed or none
        "ranks": None,
        "nodes": 0,
        "pruned_bound": 0,
        "pruned_infeasible": 0,
        "limit_hit": False,
        "done": 0,
    }
    node_limit = cfg.node_limit

    def run(idx: int) -> None:
        with lock:
            if state["limit_hit"]:
                return
            if cfg.time_limit is not None and time.monotonic() - t0 > cfg.time_limit:
                state["limit_hit"] = True
                return
            budget = (1 << 62) if node_limit is None else node_limit - state["nodes"]
            if budget <= 0:
                state["limit_hit"] = True
                return
            val, src = state["val"], state["src"]
        res = K.dfs(np.asarray(prefixes[idx], np.int64), float(val), bool(src < idx), int(budget),
                    float(w.w1), float(w.w2), inst.machines, inst.tools, *problem)
        bval, found, ranks, nodes, pb, pf, hit = res
        bval = float(bval)
        with lock:
            state["nodes"] += int(nodes)
            state["pruned_bound"] += int(pb)
            state["pruned_infeasible"] += int(pf)
            state["done"] += 1
            if hit:
                state["limit_hit"] = True
            if found and (bval < state["val"] or (bval == state["val"] and idx < state["src"])):
                state["val"], state["src"], state["ranks"] = bval, idx, np.array(ranks)
            if cfg.log_every and state["done"] % max(1, len(prefixes) // 8) == 0:
                log.info("subtrees %d/%d nodes=%d incumbent=%s root_bound=%.2f",
                         state["done"], len(prefixes), state["nodes"], state["val"], root_bound)

    if cfg.workers == 1:
        for idx in range(len(prefixes)):
            run(idx)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(run, range(len(prefixes))))

    proof = {
        "backend": K.BACKEND,
        "root_bound": root_bound,
        "greedy_objective": greedy_val,
        "subtrees": len(prefixes),
        "subtrees_completed": state["done"],
        "pruned_by_bound": state["pruned_bound"],
        "pruned_infeasible": state["pruned_infeasible"],
        "limit_hit": state["limit_hit"],
    }
    log.info("search finished nodes=%d incumbent=%s limit_hit=%s", state["nodes"], state["val"],
             state["limit_hit"])

    if state["ranks"] is not None:
        a = arr.to_assignment(state["ranks"])
        proof["incumbent_source"] = "search"
    elif greedy_val is not None:
        a = arr.to_assignment(gchoice)
        proof["incumbent_source"] = "greedy"
    else:
        a = None

    if state["limit_hit"]:
        status = FEASIBLE if a is not None else UNKNOWN
    else:
        status = OPTIMAL if a is not None else INFEASIBLE
    if a is None:
        return SolveResult(status, None, None, state["nodes"], proof)
    metrics = evaluate(inst, a, w)
    if status == OPTIMAL:
        bad = check_feasibility(inst, a, options)
        if bad:  # pragma: no cover - guards the search invariants
            raise AssertionError(f"solver returned an infeasible optimum: {bad}")
    return SolveResult(status, a, metrics, state["nodes"], proof)


def solve_exhaustive(inst: Instance, w: Weights = Weights(), options: ModelOptions = ModelOptions(),
                     cap: int = EXHAUSTIVE_CAP, backend: Optional[str] = None) -> SolveResult:
    """Enumerate all assignments; minimum weighted objective, same tie-break as :func:`solve`.

    ``backend`` forces ``"numba"`` or ``"numpy"``; by default the compiled
    kernel is used when available.
    """
    _check_ready(inst)
    size = inst.search_space_size()
    if size > cap:
        raise SearchSpaceTooLarge(f"{size} assignments exceed the cap of {cap}")
    arr = _arrays(inst, options)
    args = (float(w.w1), float(w.w2), inst.machines, inst.tools, arr.off, arr.om, arr.ol, arr.ot, arr.oc,
            arr.opart, arr.part_ops, arr.due, arr.sc, arr.life, arr.mag, arr.lim)
    if backend is None:
        fn = K.enumerate_best
        backend = K.BACKEND if K.USE_NUMBA else "numpy"
    elif backend == "numba":
        if K.enumerate_nb is None:
            raise RuntimeError("numba backend unavailable")
        fn = K.enumerate_nb
    elif backend == "numpy":
        fn = K.enumerate_np
    else:
        raise ValueError(f"unknown backend {backend!r}")
    best_val, ranks, n_feasible = fn(*args)
    proof = {"backend": backend, "enumerated": size, "feasible": int(n_feasible)}
    if not math.isfinite(best_val):
        return SolveResult(INFEASIBLE, None, None, size, proof)
    a = arr.to_assignment(ranks)
    return SolveResult(OPTIMAL, a, evaluate(inst, a, w), size, proof)
