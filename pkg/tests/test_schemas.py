import json
from pathlib import Path

import pytest
import yaml

from ksetlab.checker import evaluate
from ksetlab.model import Protocol, Value
from ksetlab.scenarios import ScenarioError, async_partition_lower_bound, partition_lower_bound, run_scenario
from ksetlab.schemas import (
    MACHINE_READABLE,
    TEXT,
    RunReport,
    ScenarioFile,
    load_scenario,
    parse_scenario,
    render,
)

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def _write(tmp_path: Path, text: str, name: str = "scenario.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_samples_load():
    scenario = load_scenario(SAMPLES / "async-partition-5-2.yaml")

    assert scenario.cfg.protocol is Protocol.ASYNC_SNAPSHOT
    assert scenario.crash_plan == {3: 0, 4: 0}
    assert scenario.schedule == (0, 1, 2, 0, 1, 2)
    assert scenario.expected.decided == (Value.of("a"), Value.of("b"), Value.of("c"))


def test_json_scenarios_load(tmp_path):
    data = {"n": 3, "t": 1, "protocol": "two_round", "values": [1, 2, 1]}
    scenario = load_scenario(_write(tmp_path, json.dumps(data), "scenario.json"))
    assert scenario.initial_values == (Value.of(1), Value.of(2), Value.of(1))


@pytest.mark.parametrize("build", [partition_lower_bound, async_partition_lower_bound])
def test_scenario_file_round_trip(build):
    scenario = build(5, 2)
    assert ScenarioFile.from_scenario(scenario).to_scenario() == scenario


def test_yaml_errors_report_the_line(tmp_path):
    with pytest.raises(ScenarioError) as caught:
        load_scenario(_write(tmp_path, "n: 4\nt: 1\nvalues: [a, b\n"))
    assert caught.value.line is not None
    assert str(caught.value).startswith("line ")


def test_unknown_keys_are_field_errors(tmp_path):
    text = "n: 4\nt: 1\nprotocol: two_round\nvalues: [a, a, a, a]\nbogus: 1\n"
    with pytest.raises(ScenarioError) as caught:
        load_scenario(_write(tmp_path, text))
    assert caught.value.field == "bogus"


def test_invalid_protocol_and_reserved_values():
    with pytest.raises(ScenarioError) as caught:
        parse_scenario({"n": 3, "t": 1, "protocol": "paxos", "values": ["a", "a", "a"]})
    assert caught.value.field == "protocol"

    with pytest.raises(ScenarioError) as caught:
        parse_scenario({"n": 3, "t": 1, "protocol": "two_round", "values": ["a", "⊥", "a"]})
    assert caught.value.field == "values"

    with pytest.raises(ScenarioError):
        parse_scenario(["not", "a", "mapping"])


def test_run_report_truncates_the_log_only_when_passing():
    scenario = partition_lower_bound(4, 2)
    record = run_scenario(scenario)
    verdicts = evaluate(record, scenario.expected)

    report = RunReport.from_record(scenario, record, verdicts, log_preview=5)
    assert report.passed
    assert report.log_truncated
    assert len(report.message_log) == 5
    assert report.distinct == ["a", "b"]
    assert report.beyond_half
    assert report.rounds_executed == 3
    assert report.steps_executed is None

    failing = [verdicts[0].__class__("forced", False, {})] + verdicts
    full = RunReport.from_record(scenario, record, failing, log_preview=5)
    assert not full.passed
    assert not full.log_truncated
    assert len(full.message_log) == len(record.messages)


def test_async_reports_show_linearized_operations():
    scenario = async_partition_lower_bound(3, 1)
    record = run_scenario(scenario)
    report = RunReport.from_record(scenario, record, evaluate(record, scenario.expected))

    assert report.steps_executed == 4
    assert report.message_log[0] == "op0 p0 update a"
    assert report.message_log[2] == "op2 p0 snapshot [a, b, ⊥]"


def test_render_formats():
    scenario = partition_lower_bound(4, 2)
    record = run_scenario(scenario)
    report = RunReport.from_record(scenario, record, evaluate(record, scenario.expected))

    machine = json.loads(render(report, MACHINE_READABLE))
    assert machine["passed"] is True
    assert machine["scenario"]["protocol"] == "trb_optimal"

    text = yaml.safe_load(render(report, TEXT))
    assert [item["decided"] for item in text["decisions"]] == ["a", "a", "b", "b"]
    assert render(report, TEXT) == render(report, TEXT)

    with pytest.raises(ValueError):
        render(report, "xml")
