from ksetlab.adversaries import random_byzantine, silent
from ksetlab.checker import check_no_mixed_bottom, check_vector_equality
from ksetlab.ksa_trb import decide_trb, run_phase1, trb_vector_factory
from ksetlab.model import BOTTOM, SENDER_FAULTY, Protocol, SystemConfig, Value
from ksetlab.sync_engine import run_sync

A, B, C = Value.of("a"), Value.of("b"), Value.of("c")
SF = SENDER_FAULTY


def test_decide_prefers_own_value_then_the_smallest_qualifying_one():
    assert decide_trb([A, A, B, B], B, 4, 2) == B
    assert decide_trb([A, A, B, SF], B, 4, 2) == A
    assert decide_trb([A, B, SF, SF], A, 4, 2) is BOTTOM
    assert decide_trb([A, A, C, C], B, 4, 2) == A


def test_sender_faulty_never_qualifies():
    assert decide_trb([SF, SF, SF, A], A, 4, 1) is BOTTOM


def test_phase1_vector_reports_silent_senders():
    cfg = SystemConfig(4, 1, Protocol.TRB_OPTIMAL)
    vectors = run_phase1(cfg, ["a", "b", "a", "b"], silent([3]))

    assert set(vectors) == {0, 1, 2}
    for vector in vectors.values():
        assert vector == (A, B, A, SF)


def test_runs_take_t_plus_one_rounds():
    for n, t in [(3, 0), (4, 1), (4, 2)]:
        cfg = SystemConfig(n, t, Protocol.TRB_OPTIMAL)
        record = run_sync(trb_vector_factory, None, cfg, ["a"] * n)
        assert record.rounds_executed == t + 1
        assert set(record.correct_decisions().values()) == {A}


def test_vectors_agree_under_random_byzantine_traffic():
    cfg = SystemConfig(5, 2, Protocol.TRB_OPTIMAL)
    for seed in range(10):
        record = run_sync(trb_vector_factory, random_byzantine([3, 4], seed), cfg, ["a", "b", "c", "a", "b"], seed)
        assert check_vector_equality(record).passed
        assert check_no_mixed_bottom(record).passed
        assert len({v for v in record.correct_decisions().values()}) <= 1
