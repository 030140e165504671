"""Text and SVG renderings of a solved loading problem.

Renderers only format numbers already held by :class:`~fmsload.model.Metrics`
or :class:`~fmsload.schedule.Schedule`; nothing is recomputed here.
Operation codes are ``<part><op>`` (part 2, operation 1 is ``21``).
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union
from xml.sax.saxutils import escape

from .instance import Instance
from .schedule import Schedule, TimedOperation, structural_violations
from .solver import FEASIBLE, OPTIMAL, SolveResult

__all__ = [
    "ComparisonRow",
    "SARIN_CHEN",
    "GAMILA_MOTAVALLI",
    "BASELINES",
    "comparison_row",
    "render_table3",
    "render_comparison",
    "render_gantt",
    "parse_gantt_svg",
]

Number = Union[int, float, Fraction]


def _fmt(v: Optional[Number], places: int = 2) -> str:
    if v is None:
        return "-"
    if isinstance(v, int):
        return str(v)
    f = Fraction(v)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{float(f):.{places}f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], left: int = 1) -> str:
    """Align columns; the first ``left`` columns are left-justified, the rest right."""
    cols = list(zip(header, *rows)) if rows else [(h,) for h in header]
    width = [max(len(c) for c in col) for col in cols]

    def line(cells):
        return "  ".join(c.ljust(w) if k < left else c.rjust(w) for k, (c, w) in enumerate(zip(cells, width))).rstrip()

    out = [line(header), "  ".join("-" * w for w in width)]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# per-machine table

def render_table3(inst: Instance, result: SolveResult, schedule: Schedule) -> str:
    """Per-machine operations, tools, load, scheduled finish, cost and utilization, plus a Sum row."""
    if result.status not in (OPTIMAL, FEASIBLE) or result.assignment is None or result.metrics is None:
        raise ValueError(f"nothing to report for status {result.status!r}")
    met = result.metrics
    ops: dict[int, list[str]] = {m: [] for m in range(1, inst.machines + 1)}
    tools: dict[int, list[int]] = {m: [] for m in range(1, inst.machines + 1)}
    for (i, j), (m, l) in result.assignment.items():
        ops[m].append(f"{i}{j}")
        if l not in tools[m]:
            tools[m].append(l)
    util = schedule.utilization
    comp = schedule.completion
    rows = []
    for m in range(1, inst.machines + 1):
        rows.append([
            f"M{m}",
            ",".join(ops[m]) or "-",
            ",".join(str(t) for t in sorted(tools[m])) or "-",
            str(met.loads[m - 1]),
            str(comp[m - 1]),
            str(met.machine_cost[m - 1]),
            f"{float(util[m - 1]):.2f}",
        ])
    rows.append([
        "Sum",
        "",
        "",
        str(met.f1_total_time),
        str(schedule.makespan),
        str(met.processing_cost),
        f"{float(schedule.mean_utilization):.3f}",
    ])
    head = [
        f"status: {result.status}",
        f"objective Z = {_fmt(met.weighted_z)}  (total time F1 = {met.f1_total_time}, unbalance L = {met.unbalance_l})",
        f"processing cost = {met.processing_cost} (budget {inst.total_cost_budget}); "
        f"setup cost = {met.setup_cost} (budget {inst.setup_cost_budget}); max load gap = {met.max_load_gap}",
        "operations are <part><op> codes; completion is the scheduled finish of the machine's last operation;",
        "the Sum line holds total load, makespan, total cost and mean utilization",
        "",
    ]
    body = _table(["Machine", "Operations", "Tools", "Load", "Completion", "Cost", "Utilization"], rows, left=3)
    return "\n".join(head) + body


# --------------------------------------------------------------------------
# comparison with published models

@dataclass(frozen=True)
class ComparisonRow:
    label: str
    processing_cost: Optional[int]
    total_time: Optional[int]
    max_completion: Optional[int]
    mean_machine_time: Optional[Number]
    max_load_deviation: Optional[int]
    note: str = ""


SARIN_CHEN = ComparisonRow(
    "Sarin and Chen", 3590, 1369, 558, 394, None,
    note="published figures; the published mean does not equal total time / 4",
)
GAMILA_MOTAVALLI = ComparisonRow(
    "Gamila and Motavalli", 4540, 1201, 403, Fraction(30025, 100), 65,
    note="published figures",
)
BASELINES = (SARIN_CHEN, GAMILA_MOTAVALLI)


def comparison_row(inst: Instance, result: SolveResult, schedule: Schedule, label: str = "This model") -> ComparisonRow:
    met = result.metrics
    if met is None:
        raise ValueError("result has no solution")
    return ComparisonRow(
        label,
        met.processing_cost,
        met.f1_total_time,
        schedule.makespan,
        Fraction(met.f1_total_time, inst.machines),
        met.max_load_gap,
        note="computed",
    )


def render_comparison(rows: Sequence[ComparisonRow]) -> str:
    header = ["Model", "Processing cost", "Total time", "Max. completion", "Mean machine time",
              "Max. load deviation"]
    body = [
        [r.label, _fmt(r.processing_cost), _fmt(r.total_time), _fmt(r.max_completion),
         _fmt(r.mean_machine_time), _fmt(r.max_load_deviation)]
        for r in rows
    ]
    text = _table(header, body)
    notes = [f"  {r.label}: {r.note}" for r in rows if r.note]
    return text + ("notes:\n" + "\n".join(notes) + "\n" if notes else "")


# --------------------------------------------------------------------------
# Gantt charts

def _check(schedule: Schedule) -> None:
    bad = structural_violations(schedule)
    if bad:
        raise ValueError("invalid schedule: " + "; ".join(map(str, bad)))


def _gantt_ascii(s: Schedule, quantum: int) -> str:
    width = max(1, math.ceil(s.makespan / quantum))
    lanes = []
    for m in range(1, s.n_machines + 1):
        row = ["."] * width
        for t in s.on_machine(m):
            a = t.start // quantum
            b = max(a + 1, t.end // quantum)
            for c in range(a, b):
                row[c] = "="
            label = f"|{t.part}.{t.op}"
            for k, ch in enumerate(label[: b - a]):
                row[a + k] = ch
        lanes.append(f"M{m:<3}" + "".join(row))
    ticks = [" "] * (width + 1)
    nums = [" "] * (width + 8)
    for c in range(0, width + 1, 10):
        ticks[c] = "|"
        lab = str(c * quantum)
        nums[c:c + len(lab)] = lab
    lanes.append("    " + "".join(ticks).rstrip())
    lanes.append("    " + "".join(nums).rstrip())
    lanes.append(f"    minutes, 1 column = {quantum} min, makespan {s.makespan}")
    return "\n".join(lanes) + "\n"


_LANE_H = 30
_X0 = 50
_SCALE = 1.5


def _gantt_svg(s: Schedule) -> str:
    w = _X0 + int(math.ceil(s.makespan * _SCALE)) + 40
    h = _LANE_H * s.n_machines + 50
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'data-makespan="{s.makespan}" data-machines="{s.n_machines}">',
        '<g font-family="monospace" font-size="11">',
    ]
    for m in range(1, s.n_machines + 1):
        y = 10 + (m - 1) * _LANE_H
        out.append(f'<text x="5" y="{y + 19}">M{m}</text>')
        out.append(f'<line x1="{_X0}" y1="{y + _LANE_H}" x2="{w - 20}" y2="{y + _LANE_H}" stroke="#ccc"/>')
    for t in s.items:
        y = 10 + (t.machine - 1) * _LANE_H + 4
        x = _X0 + t.start * _SCALE
        bw = t.duration * _SCALE
        label = f"{t.part}.{t.op}"
        out.append(
            f'<rect class="bar" x="{x:g}" y="{y}" width="{bw:g}" height="{_LANE_H - 8}" fill="#9cc3e6" stroke="#333" '
            f'data-part="{t.part}" data-op="{t.op}" data-machine="{t.machine}" data-tool="{t.tool}" '
            f'data-start="{t.start}" data-end="{t.end}">'
            f'<title>{escape(f"part {t.part} op {t.op} tool {t.tool}: {t.start}-{t.end}")}</title></rect>'
        )
        out.append(f'<text x="{x + 3:g}" y="{y + 15}">{escape(label)}</text>')
    ya = 10 + s.n_machines * _LANE_H
    out.append(f'<line x1="{_X0}" y1="{ya}" x2="{_X0 + s.makespan * _SCALE:g}" y2="{ya}" stroke="#000"/>')
    step = 50
    for v in range(0, s.makespan + 1, step):
        out.append(f'<text x="{_X0 + v * _SCALE:g}" y="{ya + 15}" text-anchor="middle">{v}</text>')
    if s.makespan % step:
        out.append(f'<text x="{_X0 + s.makespan * _SCALE:g}" y="{ya + 30}" text-anchor="middle">{s.makespan}</text>')
    out.append(f'<text x="{_X0}" y="{ya + 42}">minutes</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_gantt(schedule: Schedule, format: str = "ascii", quantum: int = 10) -> str:
    """One lane per machine with bars labelled ``part.op`` on a minute axis.

    ``quantum`` is the minutes per column of the ASCII chart.  SVG bars carry
    ``data-*`` attributes that :func:`parse_gantt_svg` reads back.
    """
    if quantum <= 0:
        raise ValueError("quantum must be positive")
    _check(schedule)
    if format == "ascii":
        return _gantt_ascii(schedule, quantum)
    if format == "svg":
        return _gantt_svg(schedule)
    raise ValueError(f"unknown gantt format {format!r}")


def parse_gantt_svg(text: str) -> list[TimedOperation]:
    root = ET.fromstring(text)
    out = []
    for el in root.iter("{http://www.w3.org/2000/svg}rect"):
        if el.get("class") != "bar":
            continue
        out.append(TimedOperation(*(int(el.get(f"data-{k}")) for k in ("part", "op", "machine", "tool", "start", "end"))))
    return out
