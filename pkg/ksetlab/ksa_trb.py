"""k-set agreement with k = ⌊n/(n−t)⌋ over n parallel TRB instances.

Phase 1 runs one TRB instance per process, all in lock-step over the same t+1 rounds; round r of
every instance travels in global round r, tagged with the instance id as the message slot. The
delivered values form the vector L, identical at every correct process. Phase 2 decides locally.
"""

from __future__ import annotations

from collections import Counter
from typing import Mapping, Optional, Sequence, Union

from .authsig import SigningCapability
from .model import BOTTOM, ProcessId, SystemConfig, Value
from .sync_engine import Adversary, ChainBundle, Outgoing, RoundMessage, SyncProcess, run_sync
from .trb import chains_for_slot, instance_trace, trb_absorb, trb_emit, trb_finalize, trb_init

TrbVector = tuple[Value, ...]


def decide_trb(vector: Sequence[Value], v_own: Value, n: int, t: int) -> Value:
    """Own value first, then the smallest value repeated n−t times, else ⊥. SF never qualifies."""

    threshold = n - t
    counts = Counter(value for value in vector if value.is_domain)
    if v_own.is_domain and counts[v_own] >= threshold:
        return v_own
    qualifying = sorted(value for value, count in counts.items() if count >= threshold)
    return qualifying[0] if qualifying else BOTTOM


class TrbVectorProcess(SyncProcess):
    def __init__(self, pid, cfg: SystemConfig, initial: Value, cap) -> None:
        super().__init__(pid, cfg, initial, cap)
        self.instances = [
            trb_init(pid, sender, cfg.t, initial if sender == pid else None, cap if sender == pid else None)
            for sender in cfg.pids
        ]
        self.vector: list[Value] = [BOTTOM] * cfg.n
        self.vector[pid] = initial

    @property
    def last_round(self) -> int:
        return self.cfg.t + 1

    def send(self, round: int) -> list[Outgoing]:
        if round > self.last_round:
            return []
        outgoing: list[Outgoing] = []
        for sender, state in enumerate(self.instances):
            chains = trb_emit(state, round, self.cap)
            if chains:
                outgoing.extend(self.broadcast(sender, ChainBundle(tuple(chains))))
        return outgoing

    def receive(self, round: int, inbox: Sequence[RoundMessage]) -> None:
        if round > self.last_round:
            return
        for sender, state in enumerate(self.instances):
            trb_absorb(state, round, chains_for_slot(inbox, sender))
        if round == self.last_round:
            for sender, state in enumerate(self.instances):
                delivered = trb_finalize(state)
                if sender != self.pid:
                    self.vector[sender] = delivered
            self.decision = decide_trb(self.vector, self.initial, self.cfg.n, self.cfg.t)

    def trace(self) -> dict[str, object]:
        return {
            "trb": {state.sender: instance_trace(state) for state in self.instances},
            "L": tuple(self.vector),
        }


def trb_vector_factory(
    pid: ProcessId, cfg: SystemConfig, initial: Value, cap: SigningCapability
) -> TrbVectorProcess:
    return TrbVectorProcess(pid, cfg, initial, cap)


def run_phase1(
    cfg: SystemConfig,
    initial_values: Union[Mapping[ProcessId, object], Sequence[object]],
    adversary: Optional[Adversary] = None,
    seed: int = 0,
) -> dict[ProcessId, TrbVector]:
    """L vector of every correct process at the end of the t+1 broadcast rounds."""

    record = run_sync(trb_vector_factory, adversary, cfg, initial_values, seed)
    return {pid: trace["L"] for pid, trace in record.traces.items()}  # type: ignore[misc]
