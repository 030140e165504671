"""Command-line front end.

Exit codes: 0 success, 1 infeasible instance or violations found, 2 usage or
input error.  Files are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from typing import Optional, Sequence

from .instance import (
    InstanceError,
    RandomParams,
    dump_instance,
    generate_random,
    load_instance_file,
    paper_example,
    validate,
)
from .model import ModelOptions, Weights, build_model, export_mps
from .report import BASELINES, comparison_row, render_comparison, render_gantt, render_table3
from .schedule import build_schedule, due_date_warnings, schedule_to_dict, schedule_to_json
from .solver import (
    FEASIBLE,
    OPTIMAL,
    SearchSpaceTooLarge,
    SolveResult,
    SolverConfig,
    solve,
    solve_exhaustive,
)

log = logging.getLogger("fmsload")


class UsageError(Exception):
    pass


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".fmsload-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# argument plumbing

def _add_instance(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance JSON file, or @paper for the bundled example")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--w1", type=float, default=0.5, help="weight of total processing time (default 0.5)")
    p.add_argument("--w2", type=float, default=0.5, help="weight of load unbalance (default 0.5)")
    p.add_argument("--max-completion-time", type=int, default=None,
                   help="cap on every machine load; overrides the instance value")
    p.add_argument("--no-tool-life", action="store_true", help="drop the tool-life constraints")
    p.add_argument("--no-magazine", action="store_true", help="drop the magazine-capacity constraints")


def _add_search(p: argparse.ArgumentParser) -> None:
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--workers", type=int, default=1)


def _add_out(p: argparse.ArgumentParser, formats: Sequence[str] = ("ascii", "svg", "json")) -> None:
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--out", default=None, help="write output here instead of standard output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmsload", description="Exact FMS machine loading with tool constraints.")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress logging on standard error")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    _add_instance(p)

    p = sub.add_parser("solve", help="branch and bound, then schedule and report")
    _add_instance(p)
    _add_model(p)
    _add_search(p)
    _add_out(p)
    p.add_argument("--mps-out", default=None, help="also write the linear model in MPS format")
    p.add_argument("--seed-check", action="store_true", help="solve twice and require identical output")

    p = sub.add_parser("oracle", help="exhaustive enumeration (small instances only)")
    _add_instance(p)
    _add_model(p)
    p.add_argument("--cap", type=int, default=10**7, help="maximum number of assignments to enumerate")
    _add_out(p, ("ascii", "json"))

    p = sub.add_parser("export-mps", help="write the linear model in MPS format")
    _add_instance(p)
    _add_model(p)
    p.add_argument("--mps-out", default=None, help="destination (standard output if omitted)")

    p = sub.add_parser("schedule", help="timed schedule of a solved assignment")
    _add_instance(p)
    _add_model(p)
    _add_search(p)
    p.add_argument("--result", default=None, help="JSON written by 'solve --format json' (solves if omitted)")
    _add_out(p, ("json", "ascii", "svg"))

    p = sub.add_parser("report", help="per-machine table, model comparison and Gantt chart")
    _add_instance(p)
    _add_model(p)
    _add_search(p)
    p.add_argument("--result", default=None, help="JSON written by 'solve --format json' (solves if omitted)")
    _add_out(p)

    p = sub.add_parser("gen", help="write a random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parts", type=int, default=3)
    p.add_argument("--ops", type=int, default=3, help="operations per part")
    p.add_argument("--machines", type=int, default=3)
    p.add_argument("--tools", type=int, default=6)
    p.add_argument("--options", type=int, default=2, help="options per operation")
    p.add_argument("--budget-factor", type=float, default=1.0)
    p.add_argument("--out", default=None)
    return ap


def _load(args):
    inst = paper_example() if args.instance == "@paper" else load_instance_file(args.instance)
    if getattr(args, "max_completion_time", None) is not None:
        inst = dataclasses.replace(inst, max_completion_time=args.max_completion_time)
    bad = validate(inst)
    return inst, bad


def _weights(args) -> Weights:
    try:
        return Weights(args.w1, args.w2)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _options(args) -> ModelOptions:
    return ModelOptions(tool_life=not args.no_tool_life, magazine=not args.no_magazine)


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(node_limit=args.node_limit, time_limit=args.time_limit, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _require_valid(bad) -> None:
    if bad:
        for v in bad:
            print(f"error: {v}", file=sys.stderr)
        raise UsageError("instance is invalid")


def _result_for(args, inst, w, opts) -> SolveResult:
    if getattr(args, "result", None):
        with open(args.result, encoding="utf-8") as fh:
            doc = json.load(fh)
        return SolveResult.from_dict(doc.get("result", doc), inst, w)
    return solve(inst, w, _config(args), opts)


def _render(inst, res: SolveResult, fmt: str, opts: ModelOptions) -> str:
    if res.assignment is None:
        if fmt == "json":
            return json.dumps({"result": res.to_dict(), "schedule": None, "warnings": []}, indent=1, sort_keys=True) + "\n"
        return f"status: {res.status}\nno feasible assignment\n"
    sched = build_schedule(inst, res.assignment, opts)
    warns = [str(x) for x in due_date_warnings(inst, sched)]
    if fmt == "json":
        doc = {"result": res.to_dict(), "schedule": schedule_to_dict(sched), "warnings": warns}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if fmt == "svg":
        return render_gantt(sched, "svg")
    text = render_table3(inst, res, sched)
    if warns:
        text += "\ntimed completion after due date (summed processing time is within it):\n"
        text += "".join(f"  {x}\n" for x in warns)
    return text


# --------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    inst, bad = _load(args)
    if bad:
        for v in bad:
            print(v)
        return 1
    print(f"ok: {inst.n_parts} parts, {inst.n_operations} operations, {inst.machines} machines, "
          f"{inst.tools} tools, {inst.search_space_size()} assignments")
    return 0


def cmd_solve(args) -> int:
    inst, bad = _load(args)
    _require_valid(bad)
    w, opts, cfg = _weights(args), _options(args), _config(args)
    if args.mps_out:
        write_atomic(args.mps_out, export_mps(build_model(inst, w, opts)))
    res = solve(inst, w, cfg, opts)
    text = _render(inst, res, args.format, opts)
    if args.seed_check:
        again = _render(inst, solve(inst, w, cfg, opts), args.format, opts)
        if again != text:
            print("error: repeated solve produced different output", file=sys.stderr)
            return 1
        print("seed check: repeated solve is byte-identical", file=sys.stderr)
    _emit(text, args.out)
    if res.status == FEASIBLE:
        print("warning: search limit reached; result is not proven optimal", file=sys.stderr)
    return 0 if res.assignment is not None else 1


def cmd_oracle(args) -> int:
    inst, bad = _load(args)
    _require_valid(bad)
    try:
        res = solve_exhaustive(inst, _weights(args), _options(args), cap=args.cap)
    except SearchSpaceTooLarge as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "json":
        _emit(res.to_json(), args.out)
    else:
        lines = [f"status: {res.status}"]
        if res.metrics is not None:
            m = res.metrics
            lines.append(f"objective Z = {m.weighted_z:g}  (total time F1 = {m.f1_total_time}, unbalance L = {m.unbalance_l})")
        lines.append(f"enumerated {res.proof['enumerated']} assignments, {res.proof['feasible']} feasible")
        _emit("\n".join(lines) + "\n", args.out)
    return 0 if res.status == OPTIMAL else 1


def cmd_export_mps(args) -> int:
    inst, bad = _load(args)
    _require_valid(bad)
    _emit(export_mps(build_model(inst, _weights(args), _options(args))), args.mps_out)
    return 0


def cmd_schedule(args) -> int:
    inst, bad = _load(args)
    _require_valid(bad)
    w, opts = _weights(args), _options(args)
    res = _result_for(args, inst, w, opts)
    if res.assignment is None:
        print(f"error: no assignment to schedule (status {res.status})", file=sys.stderr)
        return 1
    sched = build_schedule(inst, res.assignment, opts)
    if args.format == "json":
        text = schedule_to_json(sched)
    else:
        text = render_gantt(sched, args.format)
    _emit(text, args.out)
    for x in due_date_warnings(inst, sched):
        print(f"warning: {x}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    inst, bad = _load(args)
    _require_valid(bad)
    w, opts = _weights(args), _options(args)
    res = _result_for(args, inst, w, opts)
    if res.assignment is None:
        _emit(_render(inst, res, args.format, opts), args.out)
        return 1
    sched = build_schedule(inst, res.assignment, opts)
    if args.format == "ascii":
        text = (render_table3(inst, res, sched) + "\n"
                + render_comparison([*BASELINES, comparison_row(inst, res, sched)]) + "\n"
                + render_gantt(sched, "ascii"))
    else:
        text = _render(inst, res, args.format, opts)
    _emit(text, args.out)
    return 0


def cmd_gen(args) -> int:
    try:
        params = RandomParams(args.parts, args.ops, args.machines, args.tools, args.options,
                              budget_factor=args.budget_factor)
        inst = generate_random(params, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(dump_instance(inst), args.out)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "oracle": cmd_oracle,
    "export-mps": cmd_export_mps,
    "schedule": cmd_schedule,
    "report": cmd_report,
    "gen": cmd_gen,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InstanceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
