import pytest

from ksetlab.adversaries import equivocator, silent
from ksetlab.authsig import KeyRing, sign
from ksetlab.model import SENDER_FAULTY, Protocol, SystemConfig, Value
from ksetlab.sync_engine import run_sync
from ksetlab.trb import (
    EXTRACTION_CAP,
    TrbError,
    broadcast_factory,
    trb_absorb,
    trb_emit,
    trb_finalize,
    trb_init,
    trb_step,
)

A, B, C = Value.of("a"), Value.of("b"), Value.of("c")
CFG = SystemConfig(4, 1, Protocol.TRB_OPTIMAL)


def test_only_the_sender_may_broadcast():
    ring = KeyRing(3)
    with pytest.raises(TrbError):
        trb_init(1, 0, 1, A, ring.capability(1))
    with pytest.raises(TrbError):
        trb_init(0, 0, 1, A)


def test_rounds_must_advance_one_at_a_time():
    ring = KeyRing(3)
    state = trb_init(0, 0, 1, A, ring.capability(0))
    with pytest.raises(TrbError):
        trb_emit(state, 2, ring.capability(0))
    with pytest.raises(TrbError):
        trb_finalize(state)


def test_step_sends_then_absorbs():
    ring = KeyRing(3)
    state = trb_init(1, 0, 1)
    outbox = trb_step(state, 1, [sign(ring.capability(0), A)], ring.capability(1))

    assert outbox == []
    assert state.extracted == {A}
    relayed = trb_emit(state, 2, ring.capability(1))
    assert [chain.signers for chain in relayed] == [(0, 1)]


def test_extraction_is_capped_but_everything_valid_is_observed():
    ring = KeyRing(4)
    cap0 = ring.capability(0)
    state = trb_init(1, 0, 3)
    trb_emit(state, 1, ring.capability(1))
    trb_absorb(state, 1, [sign(cap0, A), sign(cap0, B), sign(cap0, C)])

    assert len(state.extracted) == EXTRACTION_CAP
    assert state.observed == {A, B, C}
    assert len(state.relay) == EXTRACTION_CAP


def test_correct_sender_is_delivered_everywhere():
    record = run_sync(broadcast_factory(0), None, CFG, ["a"] * 4)

    assert record.rounds_executed == 2
    assert set(record.correct_decisions().values()) == {A}


def test_silent_sender_is_detected():
    record = run_sync(broadcast_factory(0), silent([0]), CFG, ["a"] * 4)

    assert record.correct_decisions() == {1: SENDER_FAULTY, 2: SENDER_FAULTY, 3: SENDER_FAULTY}


def test_equivocating_sender_still_gives_agreement():
    record = run_sync(broadcast_factory(0), equivocator(0, [A, B], 4), CFG, ["a"] * 4)

    assert set(record.correct_decisions().values()) == {SENDER_FAULTY}
    extracted = record.traces[1]["trb"][0]["extracted"]
    assert extracted == (A, B)
