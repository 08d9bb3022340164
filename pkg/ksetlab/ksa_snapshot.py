"""Snapshot-based k-set agreement for crash failures, k = ⌊(n−t)/(n−2t)⌋.

Each process writes its value once, snapshots until it sees at least n−t values, freezes that view
X with x non-⊥ slots, and keeps its own value when x−t slots carry it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .model import BOTTOM, ProcessId, SystemConfig, Value
from .shm_engine import SNAPSHOT, UPDATE, AsyncProcess, SnapshotObject

ViewVector = tuple[Value, ...]


@dataclass(frozen=True)
class Continue:
    pass


@dataclass(frozen=True)
class Decided:
    value: Value


CONTINUE = Continue()
StepOutcome = Union[Continue, Decided]


@dataclass
class AsyncDecisionState:
    m: Value
    n: int
    t: int
    wrote: bool = False
    L: Optional[ViewVector] = None
    X: Optional[ViewVector] = None
    x: int = 0
    decision: Optional[Value] = None


def count_present(view: Sequence[Value]) -> int:
    return sum(1 for value in view if not value.is_bottom)


def decide_async(X: Sequence[Value], x: int, m: Value, t: int) -> Value:
    threshold = x - t
    counts = Counter(value for value in X if value.is_domain)
    if counts[m] >= threshold:
        return m
    qualifying = sorted(value for value, count in counts.items() if count >= threshold)
    return qualifying[0] if qualifying else BOTTOM


def async_propose_step(state: AsyncDecisionState, obj: SnapshotObject, pid: ProcessId) -> StepOutcome:
    if state.decision is not None:
        return Decided(state.decision)
    if not state.wrote:
        obj.update(pid, state.m)
        state.wrote = True
        return CONTINUE
    state.L = obj.snapshot(pid)
    present = count_present(state.L)
    if present < state.n - state.t:
        return CONTINUE
    state.X = state.L
    state.x = present
    state.decision = decide_async(state.X, state.x, state.m, state.t)
    return Decided(state.decision)


class SnapshotProcess(AsyncProcess):
    def __init__(self, pid: ProcessId, cfg: SystemConfig, initial: Value) -> None:
        super().__init__(pid, cfg, initial)
        self.state = AsyncDecisionState(m=initial, n=cfg.n, t=cfg.t)

    def next_op(self) -> str:
        return SNAPSHOT if self.state.wrote else UPDATE

    def step(self, memory: SnapshotObject) -> None:
        outcome = async_propose_step(self.state, memory, self.pid)
        if isinstance(outcome, Decided):
            self.decision = outcome.value
            self.view = self.state.X


def snapshot_factory(pid: ProcessId, cfg: SystemConfig, initial: Value) -> SnapshotProcess:
    return SnapshotProcess(pid, cfg, initial)
