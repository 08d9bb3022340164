"""Brute-force oracle: enumerate a small adversary or schedule space and check every run.

Three spaces are covered.

* ``trb``: a single broadcast instance. Per round and per correct recipient the Byzantine coalition
  delivers any subset of {a-chain, b-chain} in the sender's slot, with chains built only from what
  the coalition can legally sign or has received. Explored once with a faulty sender and once with a
  correct one.
* ``ksa_sync``: every {a, b} input assignment of the correct processes times every round-1
  per-recipient choice {silence, a, b} of each Byzantine process, honest afterwards.
* ``async``: every interleaving and crash point of the snapshot protocol, once with all inputs
  distinct and once with all inputs equal.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

from .adversaries import Equivocator
from .authsig import SignedChain, extend, is_valid, sign
from .checker import Verdict, check_termination, check_trb, distinct_decisions, evaluate
from .ksa_snapshot import snapshot_factory
from .model import KsetLabError, Protocol, RunRecord, SystemConfig, Value, validate_config
from .scenarios import protocol_factory, value_label
from .shm_engine import ExhaustiveSchedule, explore_async
from .sync_engine import Adversary, ChainBundle, Coalition, Outgoing, run_sync
from .trb import broadcast_factory, chains_for_slot

log = logging.getLogger(__name__)

DEFAULT_BOUND = 200_000
DEFAULT_MAX_STEPS = 64

A = Value.of("a")
B = Value.of("b")


class OracleRefusal(KsetLabError):
    def __init__(self, message: str, estimate: int) -> None:
        super().__init__(message)
        self.estimate = estimate


@dataclass
class Violation:
    label: str
    failed: list[str]
    faulty: list[int]
    initial_values: list[object]


@dataclass
class OracleSummary:
    space: str
    n: int
    t: int
    runs: int = 0
    max_distinct: int = 0
    max_domain_distinct: int = 0
    verdict_counts: dict[str, Counter] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def add(self, record: RunRecord, verdicts: list[Verdict]) -> None:
        self.runs += 1
        total = len(distinct_decisions(record))
        domain = len(distinct_decisions(record, domain_only=True))
        self.max_distinct = max(self.max_distinct, total)
        self.max_domain_distinct = max(self.max_domain_distinct, domain)
        for verdict in verdicts:
            # per-instance TRB verdicts are folded by property
            key = verdict.name.split(".")[-1] if verdict.name.startswith("trb[") else verdict.name
            self.verdict_counts.setdefault(key, Counter())["pass" if verdict.passed else "fail"] += 1
        failed = [verdict.name for verdict in verdicts if not verdict.passed]
        if failed:
            self.violations.append(
                Violation(
                    label=record.label,
                    failed=failed,
                    faulty=sorted(record.faulty),
                    initial_values=[value.label() for value in record.initial_values],
                )
            )


def _refuse_if_larger(space: str, estimate: int, bound: int) -> None:
    if estimate > bound:
        log.warning("%s oracle refused: %s runs exceed the bound of %s", space, estimate, bound)
        raise OracleRefusal(f"{space} space has {estimate} runs, more than the bound {bound}", estimate)


class TrbTemplate(Adversary):
    """The coalition template of the ``trb`` space; only the lowest coalition id speaks."""

    def __init__(self, ids, sender: int, correct: list[int], choices: tuple[int, ...], values: tuple[Value, ...]) -> None:
        super().__init__(ids)
        self.sender = sender
        self.correct = correct
        self.choices = choices
        self.values = values
        self.speaker = min(self.ids)

    def _chain_for(self, value: Value, round: int, inbox) -> Optional[SignedChain]:
        caps = self.context.caps
        coalition = sorted(caps)
        if self.sender in caps and round <= len(coalition):
            chain = sign(caps[self.sender], value)
            for pid in [pid for pid in coalition if pid != self.sender][: round - 1]:
                chain = extend(caps[pid], chain)
            return chain
        received = sorted(chains_for_slot(inbox, self.sender), key=lambda chain: (len(chain.signers), chain.signers))
        for chain in received:
            if chain.payload != value or not is_valid(chain, self.sender, max(round - 1, 1)):
                continue
            if len(chain.signers) >= round:
                return chain
            free = [pid for pid in coalition if pid not in chain.signers]
            if free:
                return extend(caps[free[0]], chain)
        return None

    def on_round(self, byz_id, round, inbox, cap):
        if byz_id != self.speaker or round > self.context.cfg.t + 1:
            return []
        outgoing: list[Outgoing] = []
        width = len(self.correct)
        for position, to in enumerate(self.correct):
            mask = self.choices[(round - 1) * width + position]
            chains = []
            for bit, value in enumerate(self.values):
                if mask & (1 << bit):
                    chain = self._chain_for(value, round, inbox)
                    if chain is not None:
                        chains.append(chain)
            if chains:
                outgoing.append(Outgoing(to, self.sender, ChainBundle(tuple(chains))))
        return outgoing


def _trb_cases(n: int, t: int) -> list[tuple[str, frozenset[int], tuple[Value, ...]]]:
    cases = [("correct-sender", frozenset(range(n - t, n)), (A,))]
    if t > 0:
        cases.insert(0, ("faulty-sender", frozenset(range(t)), (A, B)))
    return cases


def _trb_space_size(n: int, t: int) -> int:
    slots = (t + 1) * (n - t) if t > 0 else 0
    return sum((2 ** len(values)) ** slots for _, _, values in _trb_cases(n, t))


def _enumerate_trb(n: int, t: int, summary: OracleSummary) -> None:
    cfg = SystemConfig(n, t, Protocol.TRB_OPTIMAL)
    sender = 0
    for case, faulty, values in _trb_cases(n, t):
        correct = [pid for pid in range(n) if pid not in faulty]
        slots = (t + 1) * len(correct) if faulty else 0
        for index, choices in enumerate(itertools.product(range(2 ** len(values)), repeat=slots)):
            adversary = TrbTemplate(faulty, sender, correct, choices, values) if faulty else None
            record = run_sync(
                broadcast_factory(sender),
                adversary,
                cfg,
                [A.token] * n,
                label=f"trb:{case}#{index}",
            )
            summary.add(record, [check_termination(record), *check_trb(record, sender)])


def _ksa_space_size(n: int, t: int) -> int:
    return 2 ** (n - t) * 3 ** (t * (n - t))


def _enumerate_ksa_sync(cfg: SystemConfig, summary: OracleSummary) -> None:
    n, t = cfg.n, cfg.t
    faulty = list(range(n - t, n))
    correct = list(range(n - t))
    factory = protocol_factory(cfg.protocol)
    options = (None, A, B)
    index = 0
    for inputs in itertools.product((A, B), repeat=len(correct)):
        values = [*inputs, *([A] * len(faulty))]
        for picks in itertools.product(range(3), repeat=len(faulty) * len(correct)):
            adversary = None
            if faulty:
                strategies = []
                for row, byz in enumerate(faulty):
                    chosen = picks[row * len(correct): (row + 1) * len(correct)]
                    assignment = {to: options[pick] for to, pick in zip(correct, chosen)}
                    strategies.append(Equivocator(byz, assignment))
                adversary = Coalition(strategies)
            index += 1
            record = run_sync(factory, adversary, cfg, [value.token for value in values], label=f"ksa#{index}")
            summary.add(record, evaluate(record))


def async_input_vectors(cfg: SystemConfig) -> list[list[str]]:
    """All-distinct inputs stress agreement; identical inputs pin validity to the one proposal."""

    return [[value_label(pid) for pid in cfg.pids], [value_label(0)] * cfg.n]


def _enumerate_async(
    cfg: SystemConfig, summary: OracleSummary, *, bound: int, max_steps: int
) -> None:
    for values in async_input_vectors(cfg):
        runs = explore_async(snapshot_factory, cfg, values, ExhaustiveSchedule(max_steps), max_runs=bound + 1)
        for record in runs:
            if summary.runs >= bound:
                log.warning("async oracle refused: more than %s interleavings", bound)
                raise OracleRefusal(f"async space has more than {bound} runs", bound + 1)
            summary.add(record, evaluate(record))


def estimate_space(cfg: SystemConfig, space: str) -> Optional[int]:
    """Number of runs of a synchronous space; ``None`` for async, which is counted while exploring."""

    if space == "trb":
        return _trb_space_size(cfg.n, cfg.t)
    if space == "ksa_sync":
        return _ksa_space_size(cfg.n, cfg.t)
    return None


def default_space(cfg: SystemConfig) -> str:
    return "ksa_sync" if cfg.protocol.is_synchronous else "async"


def oracle_enumerate(
    cfg: SystemConfig,
    space: Optional[str] = None,
    *,
    bound: int = DEFAULT_BOUND,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> OracleSummary:
    validate_config(cfg)
    space = space or default_space(cfg)
    summary = OracleSummary(space=space, n=cfg.n, t=cfg.t)
    estimate = estimate_space(cfg, space)
    if estimate is not None:
        _refuse_if_larger(space, estimate, bound)
    log.info("oracle %s n=%s t=%s: %s runs", space, cfg.n, cfg.t, estimate if estimate is not None else "?")
    runners: dict[str, Callable[[], None]] = {
        "trb": lambda: _enumerate_trb(cfg.n, cfg.t, summary),
        "ksa_sync": lambda: _enumerate_ksa_sync(cfg, summary),
        "async": lambda: _enumerate_async(cfg, summary, bound=bound, max_steps=max_steps),
    }
    if space not in runners:
        raise KsetLabError(f"unknown oracle space {space!r}")
    runners[space]()
    log.info(
        "oracle %s done: %s runs, max distinct %s, %s violations",
        space,
        summary.runs,
        summary.max_distinct,
        len(summary.violations),
    )
    return summary
