import json

import pytest

from fmsload.instance import (
    Instance,
    InstanceReferenceError,
    InstanceSchemaError,
    InstanceSyntaxError,
    RandomParams,
    dump_instance,
    from_rows,
    generate_random,
    instance_to_dict,
    load_instance,
    paper_example,
    validate,
)


def _doc(**over):
    doc = {
        "machines": 2,
        "tools": 2,
        "tool_life": 100,
        "magazine_capacity": 2,
        "total_cost_budget": 50,
        "setup_cost_budget": 10,
        "parts": [
            {"id": 1, "due_date": 30, "setup_cost": 5, "operations": [
                {"options": [{"machine": 1, "tool": 1, "time": 10, "cost": 3},
                             {"machine": 2, "tool": 2, "time": 12, "cost": 2}]},
                {"options": [{"machine": 2, "tool": 2, "time": 8, "cost": 1}]},
            ]},
        ],
    }
    doc.update(over)
    return doc


def test_load_minimal_document():
    inst = load_instance(json.dumps(_doc()))
    assert inst.machines == 2 and inst.tools == 2
    assert inst.tool_life == (100, 100)
    assert inst.magazine_capacity == (2, 2)
    assert inst.n_operations == 2
    assert inst.search_space_size() == 2
    assert validate(inst) == []


def test_round_trip_through_json():
    inst = load_instance(json.dumps(_doc(max_completion_time=40, notes=["a"])))
    again = load_instance(dump_instance(inst))
    assert again == inst
    assert instance_to_dict(again)["max_completion_time"] == 40


def test_syntax_error_carries_position():
    with pytest.raises(InstanceSyntaxError) as exc:
        load_instance('{"machines": 2,\n  oops}')
    assert exc.value.line == 2


def test_unknown_key_is_rejected():
    with pytest.raises(InstanceSchemaError):
        load_instance(json.dumps(_doc(colour="red")))


def test_missing_key_is_rejected():
    doc = _doc()
    del doc["tool_life"]
    with pytest.raises(InstanceSchemaError):
        load_instance(json.dumps(doc))


def test_machine_reference_out_of_range():
    doc = _doc()
    doc["parts"][0]["operations"][0]["options"][0]["machine"] = 3
    with pytest.raises(InstanceReferenceError):
        load_instance(json.dumps(doc))


def test_tool_reference_out_of_range():
    doc = _doc()
    doc["parts"][0]["operations"][1]["options"][0]["tool"] = 0
    with pytest.raises(InstanceReferenceError):
        load_instance(json.dumps(doc))


def test_wrong_length_list_is_schema_error():
    with pytest.raises(InstanceSchemaError):
        load_instance(json.dumps(_doc(tool_life=[1, 2, 3])))


@pytest.mark.parametrize("path,value,rule", [
    (("parts", 0, "operations", 0, "options", 0, "time"), 0, "NonPositiveTime"),
    (("parts", 0, "operations", 0, "options", 0, "cost"), -1, "NegativeCost"),
    (("parts", 0, "due_date"), 0, "NonPositiveDueDate"),
    (("parts", 0, "setup_cost"), -2, "NegativeSetupCost"),
    (("parts", 0, "id"), 2, "PartIdMismatch"),
    (("total_cost_budget",), -1, "NegativeBudget"),
    (("tool_life",), 0, "NonPositiveToolLife"),
    (("stages",), 0, "InvalidStages"),
])
def test_validation_rules(path, value, rule):
    doc = _doc()
    tgt = doc
    for key in path[:-1]:
        tgt = tgt[key]
    tgt[path[-1]] = value
    rules = {v.rule for v in validate(load_instance(json.dumps(doc)))}
    assert rule in rules


def test_operation_without_options_is_flagged():
    doc = _doc()
    doc["parts"][0]["operations"][1]["options"] = []
    assert "NoProcessingOption" in {v.rule for v in validate(load_instance(json.dumps(doc)))}


def test_duplicate_option_is_flagged():
    doc = _doc()
    opts = doc["parts"][0]["operations"][0]["options"]
    opts.append(dict(opts[0]))
    assert "DuplicateOption" in {v.rule for v in validate(load_instance(json.dumps(doc)))}


def test_paper_example_shape(paper):
    assert validate(paper) == []
    assert paper.machines == 4 and paper.tools == 20
    assert paper.n_parts == 4 and paper.n_operations == 16
    assert paper.total_cost_budget == 4600 and paper.setup_cost_budget == 700
    assert [p.due_date for p in paper.parts] == [380, 420, 350, 400]
    assert [p.setup_cost for p in paper.parts] == [90, 70, 140, 110]
    assert sum(len(od.options) for _, _, od in paper.iter_operations()) == 47
    assert paper.search_space_size() == 1_440_000


def test_generate_random_is_deterministic():
    p = RandomParams(3, 2, 3, 4, 2)
    assert generate_random(p, 5) == generate_random(p, 5)
    assert generate_random(p, 5) != generate_random(p, 6)
    assert validate(generate_random(p, 5)) == []


def test_generate_random_rejects_bad_params():
    with pytest.raises(ValueError):
        generate_random(RandomParams(1, 1, 1, 1, 2), 0)
    with pytest.raises(ValueError):
        generate_random(RandomParams(0, 1, 1, 1, 1), 0)


def test_from_rows_builds_valid_instance():
    inst = from_rows([(1, 1, 1, 1, 5, 0), (1, 2, 2, 1, 3, 0)], machines=2, tools=1,
                     due_dates=[10], setup_costs=[1])
    assert isinstance(inst, Instance)
    assert validate(inst) == []
    assert inst.operation(1, 2).options[0].time == 3
