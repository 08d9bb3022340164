"""Authenticated Terminating Reliable Broadcast over signed relay chains.

A process extracts the payload of every valid chain it receives, relays each newly extracted chain
with its own signature in the next round, and after round t+1 delivers the unique extracted value,
or SF when it extracted none or several.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .authsig import SignedChain, SigningCapability, extend, is_valid, sign
from .model import SENDER_FAULTY, KsetLabError, ProcessId, SystemConfig, Value
from .sync_engine import ChainBundle, Outgoing, ProtocolFactory, RoundMessage, SyncProcess

log = logging.getLogger(__name__)

# two distinct values already force SF
EXTRACTION_CAP = 2


class TrbError(KsetLabError):
    pass


@dataclass
class TrbState:
    me: ProcessId
    sender: ProcessId
    t: int
    extracted: set[Value] = field(default_factory=set)
    relay: list[SignedChain] = field(default_factory=list)
    delivered: Optional[Value] = None
    observed: set[Value] = field(default_factory=set)
    round: int = 0


def trb_init(
    me: ProcessId,
    sender: ProcessId,
    t: int,
    v: Optional[Value] = None,
    cap: Optional[SigningCapability] = None,
) -> TrbState:
    state = TrbState(me=me, sender=sender, t=t)
    if me != sender:
        if v is not None:
            raise TrbError(f"p{me} is not the sender of this instance and cannot broadcast")
        return state
    if v is None or cap is None:
        raise TrbError("the sender needs a value and its signing capability")
    # the sender extracts its own value in round 0
    state.extracted.add(v)
    state.observed.add(v)
    state.relay.append(sign(cap, v))
    return state


def trb_emit(state: TrbState, r: int, cap: SigningCapability) -> list[SignedChain]:
    if r != state.round + 1:
        raise TrbError(f"instance {state.sender} at p{state.me}: round {r} after round {state.round}")
    if r > state.t + 1:
        raise TrbError(f"round {r} is past the last broadcast round {state.t + 1}")
    state.round = r
    outbox = [chain if chain.signers[-1] == state.me else extend(cap, chain) for chain in state.relay]
    state.relay = []
    return outbox


def trb_absorb(state: TrbState, r: int, inbox: Iterable[SignedChain]) -> None:
    if r != state.round:
        raise TrbError(f"absorb for round {r} but instance is in round {state.round}")
    for chain in inbox:
        if not is_valid(chain, state.sender, r):
            continue
        state.observed.add(chain.payload)
        if chain.payload in state.extracted or len(state.extracted) >= EXTRACTION_CAP:
            continue
        state.extracted.add(chain.payload)
        state.relay.append(chain)


def trb_step(
    state: TrbState, r: int, inbox: Iterable[SignedChain], cap: SigningCapability
) -> list[SignedChain]:
    """Send the round-r relays, then absorb the round-r receipts."""

    outbox = trb_emit(state, r, cap)
    trb_absorb(state, r, inbox)
    return outbox


def trb_finalize(state: TrbState) -> Value:
    if state.round < state.t + 1:
        raise TrbError(f"cannot deliver before round {state.t + 1} (instance is in round {state.round})")
    if state.delivered is None:
        if len(state.extracted) == 1:
            state.delivered = next(iter(state.extracted))
        else:
            state.delivered = SENDER_FAULTY
    return state.delivered


def instance_trace(state: TrbState) -> dict[str, object]:
    return {
        "delivered": state.delivered,
        "extracted": tuple(sorted(state.observed)),
    }


def chains_for_slot(inbox: Sequence[RoundMessage], slot: int) -> list[SignedChain]:
    chains: list[SignedChain] = []
    for message in inbox:
        if message.slot == slot and isinstance(message.body, ChainBundle):
            chains.extend(message.body.chains)
    return chains


class BroadcastProcess(SyncProcess):
    """One TRB instance; the process decides the value it delivers."""

    def __init__(self, pid, cfg: SystemConfig, initial, cap, *, sender: ProcessId) -> None:
        super().__init__(pid, cfg, initial, cap)
        self.sender = sender
        value = initial if pid == sender else None
        self.state = trb_init(pid, sender, cfg.t, value, cap if pid == sender else None)

    def send(self, round: int) -> list[Outgoing]:
        if round > self.cfg.t + 1:
            return []
        chains = trb_emit(self.state, round, self.cap)
        if not chains:
            return []
        return self.broadcast(self.sender, ChainBundle(tuple(chains)))

    def receive(self, round: int, inbox: Sequence[RoundMessage]) -> None:
        if round > self.cfg.t + 1:
            return
        trb_absorb(self.state, round, chains_for_slot(inbox, self.sender))
        if round == self.cfg.t + 1:
            self.decision = trb_finalize(self.state)

    def trace(self) -> dict[str, object]:
        return {"trb": {self.sender: instance_trace(self.state)}}


def broadcast_factory(sender: ProcessId) -> ProtocolFactory:
    def factory(pid: ProcessId, cfg: SystemConfig, initial: Value, cap: SigningCapability) -> BroadcastProcess:
        return BroadcastProcess(pid, cfg, initial, cap, sender=sender)

    return factory
