"""Reusable scenarios: adversary strategy registry, lower-bound witnesses and the scenario runner."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from .adversaries import (
    column_liar,
    crash_at,
    equivocator,
    honest,
    random_byzantine,
    silent,
)
from .checker import Expectation
from .ksa_snapshot import snapshot_factory
from .ksa_trb import trb_vector_factory
from .ksa_two_round import two_round_factory
from .model import (
    KsetLabError,
    ProcessId,
    Protocol,
    RunRecord,
    SystemConfig,
    Value,
    parse_value,
    validate_config,
)
from .shm_engine import DEFAULT_STEP_BUDGET, AsyncProtocolFactory, ExplicitSchedule, SeededSchedule, run_async
from .sync_engine import Adversary, Coalition, ProtocolFactory, run_sync

log = logging.getLogger(__name__)

CRASH = "crash"


class ScenarioError(KsetLabError):
    """A scenario cannot be parsed or does not fit its protocol."""

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None) -> None:
        location = ""
        if field:
            location += f"{field}: "
        if line is not None:
            location = f"line {line}: " + location
        super().__init__(location + message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class StrategySpec:
    strategy: str
    ids: tuple[ProcessId, ...]
    params: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    cfg: SystemConfig
    initial_values: tuple[Value, ...]
    adversary: tuple[StrategySpec, ...] = ()
    seed: int = 0
    schedule: Optional[tuple[ProcessId, ...]] = None
    expected: Optional[Expectation] = None
    name: str = ""

    @property
    def crash_plan(self) -> dict[ProcessId, int]:
        plan: dict[ProcessId, int] = {}
        for spec in self.adversary:
            if spec.strategy == CRASH:
                for pid in spec.ids:
                    plan[pid] = int(spec.params.get("after_steps", 0))  # type: ignore[call-overload]
        return plan


def _single(spec: StrategySpec) -> ProcessId:
    if len(spec.ids) != 1:
        raise ScenarioError(f"{spec.strategy} controls exactly one process", field="adversary.ids")
    return spec.ids[0]


def _signable(raw: object, field: str) -> Value:
    try:
        value = parse_value(raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc), field=field) from exc
    if not value.is_domain:
        raise ScenarioError(f"{value} is a sentinel and cannot be signed", field=field)
    return value


def _equivocator(spec: StrategySpec, n: int) -> Adversary:
    raw = spec.params.get("values")
    field = "adversary.params.values"
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ScenarioError("equivocator needs a non-empty list of values", field=field)
    return equivocator(_single(spec), [_signable(item, field) for item in raw], n)


def _slot(raw: object, n: int) -> int:
    field = "adversary.params.fabricated"
    try:
        slot = int(raw)  # type: ignore[call-overload]
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"slot {raw!r} is not an integer", field=field) from exc
    if isinstance(raw, bool) or not 0 <= slot < n:
        raise ScenarioError(f"slot {raw!r} outside [0, {n})", field=field)
    return slot


def _column_liar(spec: StrategySpec, n: int) -> Adversary:
    raw = spec.params.get("fabricated")
    field = "adversary.params.fabricated"
    if not isinstance(raw, Mapping) or not raw:
        raise ScenarioError("column_liar needs a slot -> value mapping", field=field)
    fabricated = {_slot(slot, n): _signable(value, field) for slot, value in raw.items()}
    return column_liar(_single(spec), fabricated)


STRATEGIES: dict[str, Callable[[StrategySpec, int], Adversary]] = {
    "silent": lambda spec, n: silent(spec.ids),
    "honest": lambda spec, n: honest(spec.ids),
    "crash_at": lambda spec, n: crash_at(
        spec.ids, int(spec.params.get("round", 1)), int(spec.params.get("delivered_prefix", 0))  # type: ignore[call-overload]
    ),
    "equivocator": _equivocator,
    "column_liar": _column_liar,
    "random_byzantine": lambda spec, n: random_byzantine(spec.ids, int(spec.params.get("seed", 0))),  # type: ignore[call-overload]
}

STRATEGY_PARAMS: dict[str, frozenset[str]] = {
    "silent": frozenset(),
    "honest": frozenset(),
    "crash_at": frozenset({"round", "delivered_prefix"}),
    "equivocator": frozenset({"values"}),
    "column_liar": frozenset({"fabricated"}),
    "random_byzantine": frozenset({"seed"}),
    CRASH: frozenset({"after_steps"}),
}

# integer parameters and their lower bounds (``None``: any integer)
INTEGER_PARAMS: dict[str, Optional[int]] = {
    "round": 1,
    "delivered_prefix": 0,
    "after_steps": 0,
    "seed": None,
}


def protocol_factory(protocol: Protocol) -> Union[ProtocolFactory, AsyncProtocolFactory]:
    return {
        Protocol.TWO_ROUND: two_round_factory,
        Protocol.TRB_OPTIMAL: trb_vector_factory,
        Protocol.ASYNC_SNAPSHOT: snapshot_factory,
    }[protocol]


def check_strategies(cfg: SystemConfig, specs: Sequence[StrategySpec]) -> None:
    for spec in specs:
        if spec.strategy not in STRATEGY_PARAMS:
            raise ScenarioError(f"unknown strategy {spec.strategy!r}", field="adversary.strategy")
        unknown = sorted(set(spec.params) - STRATEGY_PARAMS[spec.strategy])
        if unknown:
            raise ScenarioError(f"{spec.strategy} does not take {unknown}", field="adversary.params")
        for key, raw in sorted(spec.params.items()):
            if key not in INTEGER_PARAMS:
                continue
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise ScenarioError(f"{key} must be an integer, got {raw!r}", field=f"adversary.params.{key}")
            minimum = INTEGER_PARAMS[key]
            if minimum is not None and raw < minimum:
                raise ScenarioError(f"{key} must be >= {minimum}, got {raw}", field=f"adversary.params.{key}")
        if (spec.strategy == CRASH) == cfg.protocol.is_synchronous:
            kind = "asynchronous" if spec.strategy == CRASH else "synchronous"
            raise ScenarioError(
                f"strategy {spec.strategy!r} only applies to {kind} protocols", field="adversary.strategy"
            )
        if spec.strategy in STRATEGIES:
            # value and slot problems surface here rather than mid-run
            STRATEGIES[spec.strategy](spec, cfg.n)


def build_adversary(specs: Sequence[StrategySpec], n: int) -> Optional[Adversary]:
    strategies = [STRATEGIES[spec.strategy](spec, n) for spec in specs]
    if not strategies:
        return None
    if len(strategies) == 1:
        return strategies[0]
    return Coalition(strategies)


def validate_scenario(scenario: Scenario) -> None:
    validate_config(scenario.cfg)
    check_strategies(scenario.cfg, scenario.adversary)
    if len(scenario.initial_values) != scenario.cfg.n:
        raise ScenarioError(
            f"expected {scenario.cfg.n} values, got {len(scenario.initial_values)}", field="values"
        )
    if scenario.schedule is not None and scenario.cfg.protocol.is_synchronous:
        raise ScenarioError("schedules only apply to the asynchronous protocol", field="schedule")
    if scenario.schedule is not None:
        outside = sorted({pid for pid in scenario.schedule if not 0 <= pid < scenario.cfg.n})
        if outside:
            raise ScenarioError(f"process ids {outside} outside [0, {scenario.cfg.n})", field="schedule")


def run_scenario(
    scenario: Scenario,
    seed: Optional[int] = None,
    *,
    round_slack: int = 1,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> RunRecord:
    validate_scenario(scenario)
    cfg = scenario.cfg
    run_seed = scenario.seed if seed is None else seed
    factory = protocol_factory(cfg.protocol)
    if cfg.protocol.is_synchronous:
        record: RunRecord = run_sync(
            factory,
            build_adversary(scenario.adversary, cfg.n),
            cfg,
            scenario.initial_values,
            run_seed,
            round_budget=max(2, cfg.t + 1) + round_slack,
            label=scenario.name,
        )
    else:
        schedule = (
            ExplicitSchedule(tuple(scenario.schedule))
            if scenario.schedule is not None
            else SeededSchedule(run_seed)
        )
        record = run_async(
            factory,
            cfg,
            scenario.initial_values,
            schedule,
            scenario.crash_plan,
            step_budget=step_budget,
            label=scenario.name,
        )
        record = dataclasses.replace(record, seed=run_seed)
    if cfg.beyond_half:
        record = dataclasses.replace(record, notes=record.notes + (f"n <= 2t ({cfg.n} <= {2 * cfg.t})",))
    log.info("scenario %s ran with seed %s", scenario.name or "<unnamed>", run_seed)
    return record


def value_label(index: int) -> str:
    return chr(ord("a") + index) if index < 26 else f"v{index}"


def _groups(members: int, size: int) -> list[list[ProcessId]]:
    count = members // size
    groups = [list(range(i * size, (i + 1) * size)) for i in range(count)]
    groups[-1].extend(range(count * size, members))
    return groups


def partition_lower_bound(n: int, t: int) -> Scenario:
    """⌊n/(n−t)⌋ groups of at least n−t processes, each proposing its own value, no failures."""

    cfg = SystemConfig(n, t, Protocol.TRB_OPTIMAL)
    validate_config(cfg)
    groups = _groups(n, n - t)
    label_of = {pid: value_label(index) for index, group in enumerate(groups) for pid in group}
    values = [Value.of(label_of[pid]) for pid in range(n)]
    k = len(groups)
    return Scenario(
        cfg=cfg,
        initial_values=tuple(values),
        expected=Expectation(
            distinct_exact=k,
            domain_distinct_exact=k,
            rounds=t + 1,
            decided=tuple(Value.of(value_label(i)) for i in range(k)),
        ),
        name=f"partition-lower-bound-{n}-{t}",
    )


def async_partition_lower_bound(n: int, t: int) -> Scenario:
    """n−t live processes in ⌊(n−t)/(n−2t)⌋ groups of at least n−2t; the other t crash before any step.

    Every live process writes, then every live process snapshots, so each one sees exactly n−t
    values and keeps its own group's value.
    """

    cfg = SystemConfig(n, t, Protocol.ASYNC_SNAPSHOT)
    validate_config(cfg)
    live = n - t
    groups = _groups(live, n - 2 * t)
    k = len(groups)
    values = [Value.of(value_label(k))] * n
    for index, group in enumerate(groups):
        for pid in group:
            values[pid] = Value.of(value_label(index))
    delayed = tuple(range(live, n))
    adversary = (StrategySpec(CRASH, delayed, {"after_steps": 0}),) if delayed else ()
    survivors = tuple(range(live))
    return Scenario(
        cfg=cfg,
        initial_values=tuple(values),
        adversary=adversary,
        schedule=survivors + survivors,
        expected=Expectation(
            domain_distinct_exact=k,
            decided=tuple(Value.of(value_label(i)) for i in range(k)),
        ),
        name=f"async-partition-lower-bound-{n}-{t}",
    )


def consensus_scenario(n: int, t: int, seed: int = 0) -> Scenario:
    """With n > 2t the TRB-based protocol solves consensus."""

    if n <= 2 * t:
        raise ScenarioError(f"consensus needs n > 2t, got n={n}, t={t}")
    cfg = SystemConfig(n, t, Protocol.TRB_OPTIMAL)
    values = tuple(Value.of(value_label(pid % 2)) for pid in range(n))
    adversary = (
        (StrategySpec("random_byzantine", tuple(range(n - t, n)), {"seed": seed}),) if t else ()
    )
    return Scenario(
        cfg=cfg,
        initial_values=values,
        adversary=adversary,
        seed=seed,
        expected=Expectation(distinct_max=1),
        name=f"consensus-{n}-{t}",
    )
