"""Two-round authenticated k-set agreement, k = ⌊n/(n−t)⌋ + 1.

Round 1 exchanges signed initial values, round 2 echoes the received row. A column whose
reported values disagree identifies a Byzantine process and is blanked; a process then keeps its
own value when at least n−t slots of its filtered vector carry it, and decides ⊥ otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .authsig import SignedChain, SigningCapability, sign, single_signed
from .model import BOTTOM, ProcessId, SystemConfig, Value
from .sync_engine import Body, ChainBundle, Outgoing, RoundMessage, SyncProcess, VectorBody

ViewVector = tuple[Value, ...]
DecisionMatrix = list[list[Value]]

SLOT = 0


@dataclass
class TwoRoundState:
    me: ProcessId
    n: int
    t: int
    initial: Value
    matrix: DecisionMatrix
    held: list[Optional[SignedChain]]


def new_state(me: ProcessId, n: int, t: int, initial: Value, cap: SigningCapability) -> TwoRoundState:
    matrix = [[BOTTOM] * n for _ in range(n)]
    matrix[me][me] = initial
    held: list[Optional[SignedChain]] = [None] * n
    held[me] = sign(cap, initial)
    return TwoRoundState(me=me, n=n, t=t, initial=initial, matrix=matrix, held=held)


def round1_emit(state: TwoRoundState) -> ChainBundle:
    own = state.held[state.me]
    assert own is not None
    return ChainBundle((own,))


def round1_absorb(state: TwoRoundState, sender: ProcessId, body: Body) -> None:
    if sender == state.me or not isinstance(body, ChainBundle) or len(body.chains) != 1:
        return
    chain = body.chains[0]
    value = single_signed(chain, sender)
    if value is None:
        return
    state.matrix[state.me][sender] = value
    state.held[sender] = chain


def round2_emit(state: TwoRoundState) -> VectorBody:
    return VectorBody(tuple(state.held))


def round2_absorb(state: TwoRoundState, sender: ProcessId, body: Body) -> None:
    if sender == state.me or not isinstance(body, VectorBody) or len(body.slots) != state.n:
        return
    row: list[Value] = []
    for owner, chain in enumerate(body.slots):
        value = single_signed(chain, owner)
        row.append(BOTTOM if value is None else value)
    state.matrix[sender] = row


def filter_columns(matrix: DecisionMatrix, me: ProcessId) -> ViewVector:
    n = len(matrix)
    view: list[Value] = []
    for j in range(n):
        if j == me:
            view.append(matrix[me][me])
            continue
        w = matrix[me][j]
        if w.is_bottom:
            view.append(w)
            continue
        conflict = any(not matrix[row][j].is_bottom and matrix[row][j] != w for row in range(n))
        view.append(BOTTOM if conflict else w)
    return tuple(view)


def decide_two_round(view: ViewVector, v_own: Value, n: int, t: int) -> Value:
    support = sum(1 for value in view if value == v_own)
    return v_own if support >= n - t else BOTTOM


class TwoRoundProcess(SyncProcess):
    def __init__(self, pid, cfg: SystemConfig, initial: Value, cap: SigningCapability) -> None:
        super().__init__(pid, cfg, initial, cap)
        self.state = new_state(pid, cfg.n, cfg.t, initial, cap)
        self.view: Optional[ViewVector] = None

    def send(self, round: int) -> list[Outgoing]:
        if round == 1:
            return self.broadcast(SLOT, round1_emit(self.state))
        if round == 2:
            return self.broadcast(SLOT, round2_emit(self.state))
        return []

    def receive(self, round: int, inbox: Sequence[RoundMessage]) -> None:
        for message in inbox:
            if message.slot != SLOT:
                continue
            if round == 1:
                round1_absorb(self.state, message.sender, message.body)
            elif round == 2:
                round2_absorb(self.state, message.sender, message.body)
        if round == 2:
            self.view = filter_columns(self.state.matrix, self.pid)
            self.decision = decide_two_round(self.view, self.initial, self.cfg.n, self.cfg.t)

    def trace(self) -> dict[str, object]:
        return {
            "V": self.view,
            "matrix": tuple(tuple(row) for row in self.state.matrix),
        }


def two_round_factory(
    pid: ProcessId, cfg: SystemConfig, initial: Value, cap: SigningCapability
) -> TwoRoundProcess:
    return TwoRoundProcess(pid, cfg, initial, cap)
