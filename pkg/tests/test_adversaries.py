import pytest

from ksetlab.adversaries import crash_at, equivocator, honest, random_byzantine
from ksetlab.ksa_two_round import two_round_factory
from ksetlab.model import Protocol, SystemConfig, Value
from ksetlab.sync_engine import AdversaryError, run_sync

A, B, C = Value.of("a"), Value.of("b"), Value.of("c")
CFG = SystemConfig(4, 1, Protocol.TWO_ROUND)


def test_equivocator_splits_recipients_into_contiguous_blocks():
    assert equivocator(3, [A, B], 4).assignment == {0: A, 1: A, 2: B, 3: B}
    assert equivocator(3, [A, B, C], 4).assignment == {0: A, 1: A, 2: B, 3: C}
    with pytest.raises(AdversaryError):
        equivocator(3, [], 4)


def test_honest_strategy_follows_the_protocol():
    record = run_sync(two_round_factory, honest([3]), CFG, ["a"] * 4)

    assert record.faulty == frozenset({3})
    assert len([m for m in record.messages if m.sender == 3]) == 8
    assert set(record.correct_decisions().values()) == {A}


def test_crash_at_delivers_a_prefix_in_the_crash_round():
    record = run_sync(two_round_factory, crash_at([3], 2, delivered_prefix=1), CFG, ["a"] * 4)

    assert {m.to for m in record.messages_in_round(1) if m.sender == 3} == {0, 1, 2, 3}
    assert [m.to for m in record.messages_in_round(2) if m.sender == 3] == [0]
    with pytest.raises(AdversaryError):
        crash_at([3], 0)


def test_random_byzantine_is_a_function_of_both_seeds():
    def run(strategy_seed, run_seed):
        return run_sync(
            two_round_factory, random_byzantine([3], strategy_seed), CFG, ["a", "b", "c", "a"], run_seed
        ).messages

    assert run(1, 2) == run(1, 2)
    assert len({run(strategy_seed, 0) for strategy_seed in range(8)}) > 1


def test_random_byzantine_never_breaks_the_two_round_bound():
    k = 4 // 3 + 1
    for seed in range(25):
        record = run_sync(two_round_factory, random_byzantine([3], seed), CFG, ["a", "b", "a", "b"], seed)
        assert len(set(record.correct_decisions().values())) <= k
        assert record.rounds_executed == 2
