import pytest

from ksetlab.checker import all_passed, distinct_decisions, evaluate, labels
from ksetlab.model import InvalidConfigError, Protocol, SystemConfig, Value
from ksetlab.scenarios import (
    CRASH,
    Scenario,
    ScenarioError,
    StrategySpec,
    async_partition_lower_bound,
    consensus_scenario,
    partition_lower_bound,
    run_scenario,
    validate_scenario,
    value_label,
)


def _scenario(protocol=Protocol.TWO_ROUND, n=4, t=1, adversary=(), schedule=None, values=None):
    tokens = values if values is not None else ["a"] * n
    return Scenario(
        cfg=SystemConfig(n, t, protocol),
        initial_values=tuple(Value.of(token) for token in tokens),
        adversary=tuple(adversary),
        schedule=schedule,
    )


@pytest.mark.parametrize(("n", "t", "expected"), [(4, 2, ["a", "b"]), (6, 4, ["a", "b", "c"])])
def test_partition_lower_bound_is_attained(n, t, expected):
    scenario = partition_lower_bound(n, t)
    record = run_scenario(scenario)
    verdicts = evaluate(record, scenario.expected)

    assert all_passed(verdicts)
    assert labels(distinct_decisions(record)) == expected
    assert record.rounds_executed == t + 1


def test_partition_runs_are_flagged_beyond_half():
    record = run_scenario(partition_lower_bound(4, 2))
    assert "n <= 2t (4 <= 4)" in record.notes


@pytest.mark.parametrize(("n", "t", "k"), [(3, 1, 2), (5, 2, 3), (7, 3, 4)])
def test_async_partition_lower_bound_is_attained(n, t, k):
    scenario = async_partition_lower_bound(n, t)
    record = run_scenario(scenario)

    assert all_passed(evaluate(record, scenario.expected))
    assert len(distinct_decisions(record, domain_only=True)) == k
    assert record.faulty == frozenset(range(n - t, n))


def test_consensus_case_gives_a_single_decision():
    for seed in range(8):
        scenario = consensus_scenario(5, 2, seed)
        record = run_scenario(scenario)
        assert all_passed(evaluate(record, scenario.expected))
        assert len(distinct_decisions(record)) == 1


def test_consensus_needs_a_correct_majority():
    with pytest.raises(ScenarioError):
        consensus_scenario(4, 2)


def test_scenario_error_carries_its_location():
    error = ScenarioError("bad value", field="values", line=3)
    assert str(error) == "line 3: values: bad value"
    assert error.field == "values"
    assert error.line == 3


def test_validate_scenario_rejects_mismatches():
    with pytest.raises(ScenarioError):
        validate_scenario(_scenario(adversary=[StrategySpec(CRASH, (3,), {"after_steps": 0})]))
    with pytest.raises(ScenarioError):
        validate_scenario(_scenario(adversary=[StrategySpec("teleport", (3,))]))
    with pytest.raises(ScenarioError):
        validate_scenario(_scenario(adversary=[StrategySpec("silent", (3,), {"round": 2})]))
    with pytest.raises(ScenarioError):
        validate_scenario(_scenario(values=["a", "a"]))
    with pytest.raises(ScenarioError):
        validate_scenario(_scenario(schedule=(0, 1)))
    with pytest.raises(ScenarioError):
        validate_scenario(
            _scenario(Protocol.ASYNC_SNAPSHOT, 3, 1, adversary=[StrategySpec("silent", (2,))], values="abc")
        )
    with pytest.raises(ScenarioError, match="outside"):
        validate_scenario(_scenario(Protocol.ASYNC_SNAPSHOT, 3, 1, values="abc", schedule=(0, 7)))
    with pytest.raises(ScenarioError, match="integer"):
        validate_scenario(_scenario(adversary=[StrategySpec("random_byzantine", (3,), {"seed": "abc"})]))
    with pytest.raises(InvalidConfigError):
        validate_scenario(_scenario(Protocol.ASYNC_SNAPSHOT, 4, 2))


def test_explicit_seed_overrides_the_scenario_seed():
    scenario = _scenario(values=["a", "b", "a", "b"], adversary=[StrategySpec("random_byzantine", (3,), {"seed": 1})])
    assert run_scenario(scenario).seed == 0
    assert run_scenario(scenario, seed=12).seed == 12


def test_crash_plan_collects_crash_strategies():
    scenario = _scenario(
        Protocol.ASYNC_SNAPSHOT,
        5,
        2,
        adversary=[StrategySpec(CRASH, (1,), {"after_steps": 2}), StrategySpec(CRASH, (4,), {})],
    )
    assert scenario.crash_plan == {1: 2, 4: 0}


def test_value_labels():
    assert value_label(0) == "a"
    assert value_label(25) == "z"
    assert value_label(26) == "v26"
