"""Deterministic lock-step simulator for the synchronous message-passing model."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .authsig import KeyRing, SignedChain, SigningCapability, last_index_of
from .model import (
    DecisionRecord,
    KsetLabError,
    ProcessId,
    RunRecord,
    SystemConfig,
    Value,
    normalize_initial_values,
    validate_config,
)

log = logging.getLogger(__name__)


class AdversaryError(KsetLabError):
    pass


@dataclass(frozen=True)
class ChainBundle:
    chains: tuple[SignedChain, ...]

    def __str__(self) -> str:
        return "{" + ", ".join(str(chain) for chain in self.chains) + "}"


@dataclass(frozen=True)
class VectorBody:
    """n slots, each a one-signature chain by the slot owner or ``None`` for ⊥."""

    slots: tuple[Optional[SignedChain], ...]

    def __str__(self) -> str:
        return "[" + ", ".join("⊥" if chain is None else str(chain.payload) for chain in self.slots) + "]"


Body = Union[ChainBundle, VectorBody]


def chains_in(body: Body) -> Iterable[SignedChain]:
    if isinstance(body, ChainBundle):
        return body.chains
    return (chain for chain in body.slots if chain is not None)


@dataclass(frozen=True)
class Outgoing:
    to: ProcessId
    slot: int
    body: Body


@dataclass(frozen=True)
class RoundMessage:
    sender: ProcessId
    to: ProcessId
    round: int
    slot: int
    body: Body

    def __str__(self) -> str:
        return f"r{self.round} p{self.sender}->p{self.to} [{self.slot}] {self.body}"


@dataclass(frozen=True)
class RejectedMessage:
    round: int
    sender: ProcessId
    to: ProcessId
    slot: int
    reason: str


class SyncProcess(ABC):
    """State machine of one correct process in the round model."""

    def __init__(self, pid: ProcessId, cfg: SystemConfig, initial: Value, cap: SigningCapability) -> None:
        self.pid = pid
        self.cfg = cfg
        self.initial = initial
        self.cap = cap
        self.decision: Optional[Value] = None

    @abstractmethod
    def send(self, round: int) -> list[Outgoing]:
        ...

    @abstractmethod
    def receive(self, round: int, inbox: Sequence[RoundMessage]) -> None:
        ...

    def trace(self) -> dict[str, object]:
        return {}

    def broadcast(self, slot: int, body: Body) -> list[Outgoing]:
        return [Outgoing(to, slot, body) for to in self.cfg.pids]


ProtocolFactory = Callable[[ProcessId, SystemConfig, Value, SigningCapability], SyncProcess]


@dataclass(frozen=True)
class AdversaryContext:
    cfg: SystemConfig
    factory: ProtocolFactory
    initial_values: tuple[Value, ...]
    caps: Mapping[ProcessId, SigningCapability]
    seed: int


class Adversary(ABC):
    """Controls the Byzantine processes of a run through the ``on_round`` hook."""

    def __init__(self, ids: Iterable[ProcessId]) -> None:
        listed = list(ids)
        self.ids = frozenset(listed)
        if len(self.ids) != len(listed):
            raise AdversaryError("adversary ids must be distinct")

    def controlled(self) -> frozenset[ProcessId]:
        return self.ids

    def reset(self, context: AdversaryContext) -> None:
        self.context = context

    @abstractmethod
    def on_round(
        self,
        byz_id: ProcessId,
        round: int,
        inbox: Sequence[RoundMessage],
        cap: SigningCapability,
    ) -> list[Outgoing]:
        ...


class Coalition(Adversary):
    """Several strategies over disjoint ids acting as one colluding adversary."""

    def __init__(self, strategies: Sequence[Adversary]) -> None:
        owner: dict[ProcessId, Adversary] = {}
        for strategy in strategies:
            for pid in strategy.controlled():
                if pid in owner:
                    raise AdversaryError(f"p{pid} is controlled by more than one strategy")
                owner[pid] = strategy
        self._owner = owner
        self.strategies = tuple(strategies)
        super().__init__(owner.keys())

    def reset(self, context: AdversaryContext) -> None:
        super().reset(context)
        for strategy in self.strategies:
            strategy.reset(context)

    def on_round(self, byz_id, round, inbox, cap):
        return self._owner[byz_id].on_round(byz_id, round, inbox, cap)


@dataclass(frozen=True, kw_only=True)
class SyncRunRecord(RunRecord):
    rounds_executed: int
    messages: tuple[RoundMessage, ...] = ()
    rejected: tuple[RejectedMessage, ...] = ()
    traces: Mapping[ProcessId, Mapping[str, object]] = field(default_factory=dict)
    originations: frozenset[tuple[ProcessId, Value]] = frozenset()

    def messages_in_round(self, round: int) -> list[RoundMessage]:
        return [message for message in self.messages if message.round == round]


def check_adversary_ids(cfg: SystemConfig, ids: Iterable[ProcessId]) -> frozenset[ProcessId]:
    controlled = frozenset(ids)
    outside = sorted(pid for pid in controlled if pid < 0 or pid >= cfg.n)
    if outside:
        raise AdversaryError(f"adversary ids {outside} outside [0, {cfg.n})")
    if len(controlled) > cfg.t:
        raise AdversaryError(f"adversary controls {len(controlled)} processes but t = {cfg.t}")
    return controlled


class _ForgeryGuard:
    def __init__(self, keyring: KeyRing, faulty: frozenset[ProcessId], n: int) -> None:
        self._keyring = keyring
        self._correct = [pid for pid in range(n) if pid not in faulty]
        self.seen: set[SignedChain] = set()

    def learn(self, body: Body) -> None:
        self.seen.update(chains_in(body))

    def reason(self, body: Body) -> Optional[str]:
        for chain in chains_in(body):
            if not self._keyring.is_registered(chain):
                return f"chain {chain} was not produced through signing capabilities"
            index = last_index_of(chain, self._correct)
            if index >= 0 and chain.prefix(index + 1) not in self.seen:
                return f"chain {chain} carries a correct signature the coalition never received"
        return None


def run_sync(
    protocol: ProtocolFactory,
    adversary: Optional[Adversary],
    cfg: SystemConfig,
    initial_values: Union[Mapping[ProcessId, object], Sequence[object]],
    seed: int = 0,
    *,
    round_budget: Optional[int] = None,
    label: str = "",
) -> SyncRunRecord:
    validate_config(cfg)
    values = normalize_initial_values(cfg, initial_values)
    faulty = check_adversary_ids(cfg, adversary.controlled()) if adversary else frozenset()
    budget = round_budget if round_budget is not None else cfg.t + 2

    keyring = KeyRing(cfg.n)
    processes = {
        pid: protocol(pid, cfg, values[pid], keyring.capability(pid))
        for pid in cfg.pids
        if pid not in faulty
    }
    if adversary is not None:
        adversary.reset(
            AdversaryContext(
                cfg=cfg,
                factory=protocol,
                initial_values=values,
                caps={pid: keyring.capability(pid) for pid in sorted(faulty)},
                seed=seed,
            )
        )

    guard = _ForgeryGuard(keyring, faulty, cfg.n)
    byz_inbox: dict[ProcessId, tuple[RoundMessage, ...]] = {pid: () for pid in faulty}
    decisions: dict[ProcessId, DecisionRecord] = {}
    log_entries: list[RoundMessage] = []
    rejected: list[RejectedMessage] = []
    rounds_executed = 0
    non_termination = True

    for rnd in range(1, budget + 1):
        rounds_executed = rnd
        bodies: dict[tuple[ProcessId, ProcessId, int], Body] = {}
        for pid in sorted(processes):
            for out in processes[pid].send(rnd):
                bodies[(pid, out.to, out.slot)] = out.body
        for byz in sorted(faulty):
            assert adversary is not None
            for out in adversary.on_round(byz, rnd, byz_inbox[byz], keyring.capability(byz)):
                if out.to not in cfg.pids:
                    continue
                reason = guard.reason(out.body)
                if reason is not None:
                    log.warning("round %s: rejected message p%s->p%s: %s", rnd, byz, out.to, reason)
                    rejected.append(RejectedMessage(rnd, byz, out.to, out.slot, reason))
                    continue
                # one body per (from, to, slot); the last one wins
                bodies[(byz, out.to, out.slot)] = out.body

        inboxes: dict[ProcessId, list[RoundMessage]] = defaultdict(list)
        for (sender, to, slot) in sorted(bodies):
            message = RoundMessage(sender, to, rnd, slot, bodies[(sender, to, slot)])
            inboxes[to].append(message)
            log_entries.append(message)
            log.debug("%s", message)

        for pid in sorted(processes):
            process = processes[pid]
            process.receive(rnd, tuple(inboxes[pid]))
            if process.decision is not None and pid not in decisions:
                decisions[pid] = DecisionRecord(pid, process.decision, rnd, True)
        for byz in sorted(faulty):
            byz_inbox[byz] = tuple(inboxes[byz])
            for message in inboxes[byz]:
                guard.learn(message.body)

        if len(decisions) == len(processes):
            non_termination = False
            break

    if non_termination:
        log.info("run %s hit the round budget of %s rounds", label or "<unnamed>", budget)

    return SyncRunRecord(
        cfg=cfg,
        initial_values=values,
        faulty=faulty,
        decisions=tuple(decisions[pid] for pid in sorted(decisions)),
        non_termination=non_termination,
        seed=seed,
        label=label,
        rounds_executed=rounds_executed,
        messages=tuple(log_entries),
        rejected=tuple(rejected),
        traces={pid: processes[pid].trace() for pid in sorted(processes)},
        originations=keyring.originations,
    )
