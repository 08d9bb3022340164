import json
import os
from pathlib import Path
from unittest.mock import patch

import pytest
import yaml

from ksetlab.campaign import fuzz_scenario
from ksetlab.checker import evaluate
from ksetlab.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main, parse_arguments
from ksetlab.model import Protocol
from ksetlab.scenarios import run_scenario
from ksetlab.schemas import MACHINE_READABLE, RunReport, ScenarioFile, render

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("KSA_LOG_LEVEL", "KSA_SEED", "KSA_FUZZ_RUNS", "KSA_CONCURRENCY", "KSA_ORACLE_BOUND"):
        monkeypatch.delenv(name, raising=False)


@pytest.mark.parametrize(
    "sample",
    ["partition-4-2.yaml", "async-partition-5-2.yaml", "equivocator-two-round.yaml", "column-liar-two-round.yaml"],
)
def test_samples_pass(sample, capsys):
    assert main(["run", str(SAMPLES / sample)]) == EXIT_OK
    report = yaml.safe_load(capsys.readouterr().out)
    assert report["passed"] is True


def test_run_writes_a_machine_readable_report(tmp_path):
    out = tmp_path / "reports" / "partition.json"
    code = main(["--format", "machine-readable", "run", str(SAMPLES / "partition-4-2.yaml"), "--out", str(out)])

    assert code == EXIT_OK
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["distinct"] == ["a", "b"]
    assert report["rounds_executed"] == 3


def test_malformed_scenario_exits_2_with_a_diagnostic(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("n: 4\nt: [1\n", encoding="utf-8")

    assert main(["run", str(path)]) == EXIT_USAGE
    assert "line" in capsys.readouterr().err


def test_unmet_expectation_exits_1(tmp_path, capsys):
    path = tmp_path / "wrong.yaml"
    path.write_text(
        "n: 4\nt: 1\nprotocol: two_round\nvalues: [a, a, a, a]\nexpect:\n  distinct_exact: 2\n",
        encoding="utf-8",
    )

    assert main(["run", str(path)]) == EXIT_VIOLATION
    captured = capsys.readouterr()
    assert "expectation" in captured.err
    assert yaml.safe_load(captured.out)["passed"] is False


def test_invalid_configuration_exits_2(capsys):
    assert main(["fuzz", "async_snapshot", "4", "2", "--runs", "1"]) == EXIT_USAGE
    assert "n > 2t required" in capsys.readouterr().err


def test_fuzz_reports_replay_byte_for_byte(tmp_path):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    args = ["fuzz", "two_round", "4", "1", "--runs", "15", "--seed", "42", "--format", "machine-readable"]

    assert main([*args, "--out", str(first)]) == EXIT_OK
    assert main([*args, "--out", str(second), "--concurrency", "1"]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text(encoding="utf-8"))["runs"] == 15


def test_oracle_refusal_exits_2(capsys):
    assert main(["oracle", "trb_optimal", "4", "2", "--bound", "5"]) == EXIT_USAGE
    assert "324" in capsys.readouterr().err


def test_trb_oracle_passes(capsys):
    assert main(["oracle", "trb", "3", "1"]) == EXIT_OK
    assert yaml.safe_load(capsys.readouterr().out)["runs"] == 272


def test_lower_bound_witness_feeds_back_into_run(tmp_path, capsys):
    assert main(["lower-bound", "async", "5", "2"]) == EXIT_OK
    witness = capsys.readouterr().out
    assert yaml.safe_load(witness)["expect"]["domain_distinct_exact"] == 3

    path = tmp_path / "witness.yaml"
    path.write_text(witness, encoding="utf-8")
    assert main(["run", str(path)]) == EXIT_OK


def test_unknown_verb_is_a_usage_error():
    assert main(["teleport"]) == EXIT_USAGE


def test_settings_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("KSA_FUZZ_RUNS", "7")
    assert parse_arguments(["fuzz", "two_round", "4", "1"]).runs == 7

    (tmp_path / "ksetlab.config.yaml").write_text("fuzz:\n  runs: 5\nseed: 9\n", encoding="utf-8")
    settings = parse_arguments(["fuzz", "two_round", "4", "1"])
    assert settings.runs == 5
    assert settings.seed == 9

    settings = parse_arguments(["fuzz", "two_round", "4", "1", "--runs", "3", "--seed", "1"])
    assert settings.runs == 3
    assert settings.seed == 1
    assert settings.replay_seed == 1
    assert parse_arguments(["run", "scenario.yaml"]).replay_seed is None


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv("KSA_LOG_LEVEL", "trace")
    assert parse_arguments(["lower-bound", "sync", "4", "2"]).log_level == "trace"

    monkeypatch.setenv("KSA_LOG_LEVEL", "chatty")
    with pytest.raises(SystemExit) as caught:
        parse_arguments(["lower-bound", "sync", "4", "2"])
    assert caught.value.code == 2


def test_env_file_supplies_defaults(tmp_path):
    env_path = tmp_path / "lab.env"
    env_path.write_text("KSA_ORACLE_BOUND=99\n", encoding="utf-8")

    with patch.dict(os.environ, {}, clear=False):
        settings = parse_arguments(["--env-file", str(env_path), "oracle", "trb", "3", "1"])
    assert settings.bound == 99


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "absent.yaml"), "lower-bound", "sync", "4", "2"]) == EXIT_USAGE
    assert "does not exist" in capsys.readouterr().err


SYNC_HEADER = "n: 4\nt: 1\nprotocol: two_round\nvalues: [a, a, b, b]\nadversary:\n"


@pytest.mark.parametrize(
    "body, field",
    [
        ("n: 3\nt: 1\nprotocol: async_snapshot\nvalues: [a, b, c]\nschedule: [0, 7]\n", "schedule"),
        (SYNC_HEADER + "  - strategy: random_byzantine\n    ids: [3]\n    params: {seed: abc}\n", "params.seed"),
        (SYNC_HEADER + "  - strategy: crash_at\n    ids: [3]\n    params: {round: two}\n", "params.round"),
        (SYNC_HEADER + "  - strategy: equivocator\n    ids: [3]\n    params: {values: ['⊥', b]}\n", "params.values"),
        (SYNC_HEADER + "  - strategy: equivocator\n    ids: [3]\n    params: {values: [SF]}\n", "params.values"),
        (SYNC_HEADER + "  - strategy: column_liar\n    ids: [3]\n    params: {fabricated: {0: '⊥'}}\n", "params.fabricated"),
        (SYNC_HEADER + "  - strategy: column_liar\n    ids: [3]\n    params: {fabricated: {9: b}}\n", "params.fabricated"),
        (
            "n: 3\nt: 1\nprotocol: async_snapshot\nvalues: [a, b, c]\nadversary:\n"
            "  - strategy: crash\n    ids: [2]\n    params: {after_steps: -1}\n",
            "params.after_steps",
        ),
    ],
)
def test_bad_scenario_inputs_exit_2(tmp_path, capsys, body, field):
    path = tmp_path / "bad.yaml"
    path.write_text(body, encoding="utf-8")

    assert main(["run", str(path)]) == EXIT_USAGE
    assert field in capsys.readouterr().err


def test_echoed_scenario_replays_despite_a_configured_seed(tmp_path, monkeypatch):
    (tmp_path / "ksetlab.config.yaml").write_text(
        "seed: 42\nfuzz:\n  seed: 42\nreport:\n  log_preview: 40\n", encoding="utf-8"
    )
    monkeypatch.setenv("KSA_SEED", "42")
    scenario = next(
        candidate
        for candidate in (fuzz_scenario(Protocol.TRB_OPTIMAL, 5, 2, index, 3) for index in range(50))
        if candidate.adversary
    )
    path = tmp_path / "echo.yaml"
    path.write_text(render(ScenarioFile.from_scenario(scenario)), encoding="utf-8")
    out = tmp_path / "echo.json"

    assert main(["run", str(path), "--format", "machine-readable", "--out", str(out)]) == EXIT_OK

    record = run_scenario(scenario)
    expected = RunReport.from_record(scenario, record, evaluate(record), log_preview=40)
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["seed"] == scenario.seed
    assert report == json.loads(render(expected, MACHINE_READABLE))
