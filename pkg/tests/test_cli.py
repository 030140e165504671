import json
import os
import re
import subprocess
import sys

import pytest

from fmsload.cli import run, write_atomic
from fmsload.instance import RandomParams, dump_instance, generate_random, instance_to_dict, paper_example

from mip_helpers import highs_objective


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(dump_instance(generate_random(RandomParams(2, 2, 2, 3, 2), 4)))
    return str(path)


def _objective(text):
    return float(re.search(r"objective Z = ([0-9.]+)", text).group(1))


def test_validate_ok(tiny, capsys):
    assert run(["validate", "--instance", tiny]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_bad_reference(tmp_path, capsys):
    doc = instance_to_dict(paper_example())
    doc["parts"][0]["operations"][0]["options"][0]["machine"] = 9
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(doc))
    assert run(["validate", "--instance", str(path)]) == 2
    assert "InstanceReferenceError" in capsys.readouterr().err


def test_validate_rule_violations_exit_1(tmp_path, capsys):
    doc = instance_to_dict(paper_example())
    doc["parts"][0]["due_date"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run(["validate", "--instance", str(path)]) == 1
    assert "NonPositiveDueDate" in capsys.readouterr().out


def test_missing_file_and_usage_errors(capsys):
    assert run(["validate", "--instance", "/nonexistent.json"]) == 2
    assert run(["solve"]) == 2
    assert run(["solve", "--instance", "@paper", "--w1", "0.7", "--w2", "0.7"]) == 2
    assert "sum to 1" in capsys.readouterr().err


def test_oracle_and_solve_agree(tiny, capsys):
    assert run(["oracle", "--instance", tiny]) == 0
    a = _objective(capsys.readouterr().out)
    assert run(["solve", "--instance", tiny]) == 0
    b = _objective(capsys.readouterr().out)
    assert a == b


def test_solve_paper_prints_table(capsys):
    assert run(["solve", "--instance", "@paper", "--seed-check"]) == 0
    cap = capsys.readouterr()
    assert "Machine" in cap.out and "\nSum " in cap.out
    assert "byte-identical" in cap.err


def test_solve_json_and_result_reuse(tiny, tmp_path, capsys):
    out = tmp_path / "res.json"
    assert run(["solve", "--instance", tiny, "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["status"] == "optimal"
    assert run(["report", "--instance", tiny, "--result", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Gamila and Motavalli" in text and "minutes, 1 column" in text
    assert run(["schedule", "--instance", tiny, "--result", str(out)]) == 0
    sched = json.loads(capsys.readouterr().out)
    assert len(sched["items"]) == 4


def test_schedule_svg_and_ascii(tiny, capsys):
    assert run(["schedule", "--instance", tiny, "--format", "svg"]) == 0
    assert capsys.readouterr().out.startswith("<svg")
    assert run(["solve", "--instance", tiny, "--format", "svg"]) == 0
    assert capsys.readouterr().out.startswith("<svg")
    assert run(["schedule", "--instance", tiny, "--format", "ascii"]) == 0
    assert capsys.readouterr().out.startswith("M1")


def test_infeasible_exit_code(tmp_path, capsys):
    doc = instance_to_dict(generate_random(RandomParams(2, 2, 2, 3, 2), 4))
    doc["total_cost_budget"] = 0
    for p in doc["parts"]:
        for op in p["operations"]:
            for o in op["options"]:
                o["cost"] = 1
    path = tmp_path / "inf.json"
    path.write_text(json.dumps(doc))
    assert run(["solve", "--instance", str(path)]) == 1
    assert "status: infeasible" in capsys.readouterr().out
    assert run(["oracle", "--instance", str(path)]) == 1


def test_oracle_cap_is_usage_error(capsys):
    assert run(["oracle", "--instance", "@paper", "--cap", "10"]) == 2


def test_export_mps_matches_internal_objective(tiny, tmp_path, capsys):
    mps = tmp_path / "m.mps"
    assert run(["export-mps", "--instance", tiny, "--mps-out", str(mps)]) == 0
    assert run(["oracle", "--instance", tiny]) == 0
    internal = _objective(capsys.readouterr().out)
    status, obj = highs_objective(mps.read_text())
    assert status == "Optimal"
    assert obj == pytest.approx(internal, abs=1e-9)


def test_solve_writes_mps_alongside(tiny, tmp_path, capsys):
    mps = tmp_path / "s.mps"
    assert run(["solve", "--instance", tiny, "--mps-out", str(mps)]) == 0
    assert mps.read_text().startswith("NAME")


def test_flags_reach_the_model(capsys):
    assert run(["solve", "--instance", "@paper", "--no-tool-life", "--format", "json"]) == 0
    relaxed = json.loads(capsys.readouterr().out)["result"]["objective"]
    assert run(["solve", "--instance", "@paper", "--format", "json"]) == 0
    full = json.loads(capsys.readouterr().out)["result"]["objective"]
    assert relaxed <= full
    assert run(["solve", "--instance", "@paper", "--max-completion-time", "400"]) == 1
    assert run(["solve", "--instance", "@paper", "--node-limit", "3", "--workers", "2"]) in (0, 1)


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["gen", "--seed", "9", "--out", str(a)]) == 0
    assert run(["gen", "--seed", "9", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert run(["gen", "--options", "99"]) == 2


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    write_atomic(str(target), "hello")
    assert target.read_text() == "hello"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_console_entry_point(tiny):
    proc = subprocess.run([sys.executable, "-m", "fmsload.cli", "validate", "--instance", tiny],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("ok:")
