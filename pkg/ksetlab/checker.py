"""Post-hoc verdicts over run records.

Every check is a pure function of the record and returns a ``Verdict`` carrying the evidence a
reader needs to reproduce the failure: witness process ids, value sets and the first offending
round, step or log position.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Mapping, Optional, Sequence

from .model import (
    BOTTOM,
    Protocol,
    RunRecord,
    Value,
    canonical,
    compute_k_bound,
)
from .shm_engine import UPDATE, AsyncRunRecord
from .sync_engine import SyncRunRecord


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    evidence: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Expectation:
    """Optional claims a scenario makes about its own outcome."""

    distinct_max: Optional[int] = None
    distinct_exact: Optional[int] = None
    domain_distinct_max: Optional[int] = None
    domain_distinct_exact: Optional[int] = None
    rounds: Optional[int] = None
    decided: Optional[tuple[Value, ...]] = None

    def is_empty(self) -> bool:
        return all(getattr(self, name) is None for name in self.__dataclass_fields__)


def labels(values) -> list:
    return [value.label() for value in canonical(values)]


def distinct_decisions(record: RunRecord, *, domain_only: bool = False) -> list[Value]:
    decided = record.correct_decisions().values()
    if domain_only:
        decided = [value for value in decided if value.is_domain]
    return canonical(decided)


def all_passed(verdicts: Sequence[Verdict]) -> bool:
    return all(verdict.passed for verdict in verdicts)


def check_validity(record: RunRecord) -> Verdict:
    proposals = {record.initial_values[pid] for pid in record.correct}
    if len(proposals) != 1:
        return Verdict("validity", True, {"vacuous": True})
    (v,) = proposals
    offenders = {
        pid: value.label() for pid, value in sorted(record.correct_decisions().items()) if value != v
    }
    return Verdict("validity", not offenders, {"proposed": v.label(), "offenders": offenders})


def check_agreement(record: RunRecord, k: int, *, domain_only: bool = False, name: str = "agreement") -> Verdict:
    distinct = distinct_decisions(record, domain_only=domain_only)
    return Verdict(
        name,
        len(distinct) <= k,
        {"k": k, "distinct": labels(distinct), "domain_only": domain_only},
    )


def check_termination(record: RunRecord) -> Verdict:
    decided = record.correct_decisions()
    undecided = [pid for pid in record.correct if pid not in decided]
    return Verdict(
        "termination",
        not undecided and not record.non_termination,
        {"undecided": undecided, "non_termination": record.non_termination},
    )


def check_rounds(record: SyncRunRecord, expected: int) -> Verdict:
    return Verdict(
        "rounds",
        record.rounds_executed == expected,
        {"expected": expected, "executed": record.rounds_executed},
    )


def check_vector_equality(record: SyncRunRecord) -> Verdict:
    vectors = {pid: record.traces.get(pid, {}).get("L") for pid in record.correct}
    distinct = {vector for vector in vectors.values()}
    evidence = {
        "vectors": {
            pid: None if vector is None else [value.label() for value in vector]  # type: ignore[union-attr]
            for pid, vector in sorted(vectors.items())
        }
    }
    return Verdict("vector_equality", len(distinct) <= 1 and None not in distinct, evidence)


def check_no_mixed_bottom(record: RunRecord) -> Verdict:
    decided = record.correct_decisions()
    bottoms = sorted(pid for pid, value in decided.items() if value.is_bottom)
    values = sorted(pid for pid, value in decided.items() if value.is_domain)
    return Verdict(
        "no_mixed_bottom",
        not (bottoms and values),
        {"bottom": bottoms, "domain": values},
    )


def check_trb(record: SyncRunRecord, instance: int) -> list[Verdict]:
    """Termination, Validity, Integrity and Agreement of one broadcast instance."""

    prefix = f"trb[{instance}]"
    delivered: dict[int, Optional[Value]] = {}
    for pid in record.correct:
        instances = record.traces.get(pid, {}).get("trb", {})
        trace = instances.get(instance) if isinstance(instances, Mapping) else None
        delivered[pid] = trace.get("delivered") if isinstance(trace, Mapping) else None

    def shown(mapping: Mapping[int, Optional[Value]]) -> dict[int, object]:
        return {pid: None if value is None else value.label() for pid, value in sorted(mapping.items())}

    missing = [pid for pid, value in delivered.items() if value is None]
    verdicts = [Verdict(f"{prefix}.termination", not missing, {"missing": missing})]

    if instance in record.faulty:
        verdicts.append(Verdict(f"{prefix}.validity", True, {"vacuous": True}))
    else:
        sent = record.initial_values[instance]
        wrong = {pid: value for pid, value in delivered.items() if value != sent}
        verdicts.append(
            Verdict(f"{prefix}.validity", not wrong, {"sent": sent.label(), "offenders": shown(wrong)})
        )

    unsigned = {
        pid: value
        for pid, value in delivered.items()
        if value is not None and value.is_domain and (instance, value) not in record.originations
    }
    verdicts.append(Verdict(f"{prefix}.integrity", not unsigned, {"unsigned": shown(unsigned)}))

    values = {value for value in delivered.values() if value is not None}
    verdicts.append(
        Verdict(f"{prefix}.agreement", len(values) <= 1, {"delivered": shown(delivered)})
    )
    return verdicts


def _included(smaller: Sequence[Value], larger: Sequence[Value]) -> bool:
    return all(a.is_bottom or a == b for a, b in zip(smaller, larger))


def _present(view: Sequence[Value]) -> int:
    return sum(1 for value in view if not value.is_bottom)


def _show_view(view: Sequence[Value]) -> list:
    return [value.label() for value in view]


def check_snapshot_history(record: AsyncRunRecord) -> Verdict:
    n = record.cfg.n
    registers: list[Value] = [BOTTOM] * n
    written: dict[int, Value] = {}
    views: list[tuple[str, tuple[Value, ...]]] = []

    def fail(reason: str, **evidence: object) -> Verdict:
        return Verdict("snapshot_history", False, {"reason": reason, **evidence})

    for position, op in enumerate(record.history):
        if op.index != position:
            return fail("log positions are not consecutive", position=position, index=op.index)
        if op.kind == UPDATE:
            if op.value is None or not op.value.is_domain:
                return fail("update of a non-domain value", position=position, pid=op.pid)
            registers[op.pid] = op.value
            written[op.pid] = op.value
            continue
        current = tuple(registers)
        if op.view != current:
            return fail(
                "snapshot differs from the registers at its linearization point",
                position=position,
                pid=op.pid,
                view=_show_view(op.view or ()),
                registers=_show_view(current),
            )
        if op.pid in written and op.view[op.pid] != written[op.pid]:
            return fail("snapshot misses the invoker's own value", position=position, pid=op.pid)
        views.append((f"op{position}", op.view))

    for pid, view in sorted(record.views.items()):
        views.append((f"X{pid}", view))
        if pid in written and view[pid] != written[pid]:
            return fail("frozen view misses the owner's value", pid=pid)

    ladder = sorted(views, key=lambda item: _present(item[1]))
    for (name_a, a), (name_b, b) in pairwise(ladder):
        if not _included(a, b):
            return fail("views are not comparable", views={name_a: _show_view(a), name_b: _show_view(b)})
    return Verdict("snapshot_history", True, {"operations": len(record.history), "views": len(views)})


def _decision_views(record: AsyncRunRecord) -> dict[int, tuple[Value, ...]]:
    decided = record.correct_decisions()
    return {pid: view for pid, view in record.views.items() if pid in decided}


def check_smallest_snapshot_veto(record: AsyncRunRecord) -> Verdict:
    """A decided domain value appears at least x_min − t times in the smallest decision view."""

    views = _decision_views(record)
    if not views:
        return Verdict("smallest_snapshot_veto", True, {"vacuous": True})
    owner, smallest = min(views.items(), key=lambda item: (_present(item[1]), item[0]))
    x_min = _present(smallest)
    counts = Counter(smallest)
    threshold = x_min - record.cfg.t
    offenders = {
        pid: value.label()
        for pid, value in sorted(record.correct_decisions().items())
        if value.is_domain and counts[value] < threshold
    }
    return Verdict(
        "smallest_snapshot_veto",
        not offenders,
        {"smallest_view_of": owner, "x_min": x_min, "X_min": _show_view(smallest), "offenders": offenders},
    )


def check_bottom_monotonicity(record: AsyncRunRecord) -> Verdict:
    """No process whose view is contained in that of a non-⊥ decider decides ⊥."""

    decided = record.correct_decisions()
    views = _decision_views(record)
    for i, view_i in sorted(views.items()):
        if not decided[i].is_domain:
            continue
        for j, view_j in sorted(views.items()):
            if decided[j].is_bottom and _included(view_j, view_i):
                return Verdict(
                    "bottom_monotonicity",
                    False,
                    {"decider": i, "value": decided[i].label(), "bottom_decider": j},
                )
    return Verdict("bottom_monotonicity", True, {})


def check_expectation(record: RunRecord, expected: Expectation) -> Verdict:
    total = len(distinct_decisions(record))
    domain = len(distinct_decisions(record, domain_only=True))
    mismatches: list[str] = []
    if expected.distinct_max is not None and total > expected.distinct_max:
        mismatches.append(f"{total} distinct decisions > {expected.distinct_max}")
    if expected.distinct_exact is not None and total != expected.distinct_exact:
        mismatches.append(f"{total} distinct decisions != {expected.distinct_exact}")
    if expected.domain_distinct_max is not None and domain > expected.domain_distinct_max:
        mismatches.append(f"{domain} distinct domain decisions > {expected.domain_distinct_max}")
    if expected.domain_distinct_exact is not None and domain != expected.domain_distinct_exact:
        mismatches.append(f"{domain} distinct domain decisions != {expected.domain_distinct_exact}")
    if expected.rounds is not None:
        if not isinstance(record, SyncRunRecord):
            mismatches.append("rounds are only defined for synchronous runs")
        elif record.rounds_executed != expected.rounds:
            mismatches.append(f"{record.rounds_executed} rounds != {expected.rounds}")
    if expected.decided is not None:
        wanted = canonical(expected.decided)
        if distinct_decisions(record) != wanted:
            mismatches.append(f"decided {labels(distinct_decisions(record))} != {labels(wanted)}")
    return Verdict(
        "expectation",
        not mismatches,
        {"mismatches": mismatches, "distinct": labels(distinct_decisions(record))},
    )


def evaluate(record: RunRecord, expected: Optional[Expectation] = None) -> list[Verdict]:
    cfg = record.cfg
    k = compute_k_bound(cfg)
    verdicts = [check_validity(record)]
    if cfg.protocol is Protocol.TWO_ROUND:
        assert isinstance(record, SyncRunRecord)
        verdicts += [
            check_agreement(record, k),
            check_termination(record),
            check_rounds(record, 2),
        ]
    elif cfg.protocol is Protocol.TRB_OPTIMAL:
        assert isinstance(record, SyncRunRecord)
        verdicts += [
            check_agreement(record, k, domain_only=True),
            check_termination(record),
            check_vector_equality(record),
            check_no_mixed_bottom(record),
            check_rounds(record, cfg.t + 1),
        ]
        for instance in cfg.pids:
            verdicts += check_trb(record, instance)
    else:
        assert isinstance(record, AsyncRunRecord)
        verdicts += [
            check_agreement(record, k, domain_only=True),
            check_agreement(record, k + 1, name="agreement_total"),
            check_termination(record),
            check_snapshot_history(record),
            check_smallest_snapshot_veto(record),
            check_bottom_monotonicity(record),
        ]
    if expected is not None and not expected.is_empty():
        verdicts.append(check_expectation(record, expected))
    return verdicts
