"""Asynchronous shared-memory simulator around a single-writer atomic snapshot object.

Every ``update`` and ``snapshot`` is one indivisible scheduler step, so the step order is the
linearization order. Schedules are seeded (shuffled passes with random bursts, fair by
construction), explicit, or exhaustive.
"""

from __future__ import annotations

import copy
import itertools
import logging
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Optional, Sequence, Union

from .model import (
    BOTTOM,
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

UPDATE = "update"
SNAPSHOT = "snapshot"

DEFAULT_STEP_BUDGET = 10_000
_BURSTS = (1, 1, 1, 2, 3, 5)


class SchedulerError(KsetLabError):
    pass


@dataclass(frozen=True)
class LinearizedOp:
    index: int
    pid: ProcessId
    kind: str
    value: Optional[Value] = None
    view: Optional[tuple[Value, ...]] = None


class SnapshotObject:
    def __init__(self, n: int) -> None:
        self.registers: list[Value] = [BOTTOM] * n
        self.log: list[LinearizedOp] = []
        self.crashed: set[ProcessId] = set()
        self.update_count = 0

    def crash(self, pid: ProcessId) -> None:
        self.crashed.add(pid)

    def _check(self, pid: ProcessId) -> None:
        if pid in self.crashed:
            raise SchedulerError(f"crashed process p{pid} cannot take a step")

    def update(self, pid: ProcessId, v: Value) -> None:
        self._check(pid)
        if not v.is_domain:
            raise ValueError(f"only domain values can be written, got {v}")
        self.registers[pid] = v
        self.update_count += 1
        self.log.append(LinearizedOp(len(self.log), pid, UPDATE, value=v))

    def snapshot(self, pid: ProcessId) -> tuple[Value, ...]:
        self._check(pid)
        view = tuple(self.registers)
        self.log.append(LinearizedOp(len(self.log), pid, SNAPSHOT, view=view))
        return view


@dataclass(frozen=True)
class SeededSchedule:
    seed: int


@dataclass(frozen=True)
class ExplicitSchedule:
    steps: tuple[ProcessId, ...]


@dataclass(frozen=True)
class ExhaustiveSchedule:
    max_steps: int


Schedule = Union[SeededSchedule, ExplicitSchedule, ExhaustiveSchedule]


def describe_schedule(schedule: Schedule) -> str:
    if isinstance(schedule, SeededSchedule):
        return f"seeded:{schedule.seed}"
    if isinstance(schedule, ExplicitSchedule):
        return "explicit:" + ",".join(str(pid) for pid in schedule.steps)
    return f"exhaustive:{schedule.max_steps}"


class AsyncProcess(ABC):
    def __init__(self, pid: ProcessId, cfg: SystemConfig, initial: Value) -> None:
        self.pid = pid
        self.cfg = cfg
        self.initial = initial
        self.decision: Optional[Value] = None
        self.view: Optional[tuple[Value, ...]] = None

    @abstractmethod
    def next_op(self) -> str:
        ...

    @abstractmethod
    def step(self, memory: SnapshotObject) -> None:
        ...


AsyncProtocolFactory = Callable[[ProcessId, SystemConfig, Value], AsyncProcess]


@dataclass(frozen=True, kw_only=True)
class AsyncRunRecord(RunRecord):
    schedule: str
    steps: tuple[ProcessId, ...] = ()
    crash_events: tuple[tuple[int, ProcessId], ...] = ()
    crash_plan: Mapping[ProcessId, int] = field(default_factory=dict)
    history: tuple[LinearizedOp, ...] = ()
    views: Mapping[ProcessId, tuple[Value, ...]] = field(default_factory=dict)

    @property
    def steps_executed(self) -> int:
        return len(self.steps)


def check_crash_plan(cfg: SystemConfig, crash_plan: Mapping[ProcessId, int]) -> dict[ProcessId, int]:
    plan = {int(pid): int(after) for pid, after in crash_plan.items()}
    if len(plan) > cfg.t:
        raise SchedulerError(f"crash plan names {len(plan)} processes but t = {cfg.t}")
    outside = sorted(pid for pid in plan if pid < 0 or pid >= cfg.n)
    if outside:
        raise SchedulerError(f"crash plan ids {outside} outside [0, {cfg.n})")
    return plan


class _World:
    def __init__(
        self,
        factory: AsyncProtocolFactory,
        cfg: SystemConfig,
        values: tuple[Value, ...],
        crash_plan: Mapping[ProcessId, int],
    ) -> None:
        self.cfg = cfg
        self.values = values
        self.memory = SnapshotObject(cfg.n)
        self.processes = {pid: factory(pid, cfg, values[pid]) for pid in cfg.pids}
        self.crash_plan = dict(crash_plan)
        self.taken = [0] * cfg.n
        self.crashed: set[ProcessId] = set()
        self.decisions: dict[ProcessId, DecisionRecord] = {}
        self.steps: list[ProcessId] = []
        self.crash_events: list[tuple[int, ProcessId]] = []
        self.last_seen: dict[ProcessId, int] = {}
        for pid, after in sorted(self.crash_plan.items()):
            if after <= 0:
                self.crash(pid)

    def is_enabled(self, pid: ProcessId) -> bool:
        return pid not in self.crashed and pid not in self.decisions

    def enabled(self) -> list[ProcessId]:
        return [pid for pid in self.cfg.pids if self.is_enabled(pid)]

    def finished(self) -> bool:
        return not self.enabled()

    def crash(self, pid: ProcessId) -> None:
        self.crashed.add(pid)
        self.memory.crash(pid)
        self.crash_events.append((len(self.steps), pid))
        log.debug("p%s crashed after %s steps", pid, self.taken[pid])

    def stutters(self, pid: ProcessId) -> bool:
        """The next step of ``pid`` would repeat its previous snapshot verbatim."""

        process = self.processes[pid]
        return process.next_op() == SNAPSHOT and self.last_seen.get(pid) == self.memory.update_count

    def step(self, pid: ProcessId) -> None:
        if pid in self.crashed:
            raise SchedulerError(f"crashed process p{pid} cannot take a step")
        if pid in self.decisions:
            raise SchedulerError(f"p{pid} has already decided")
        process = self.processes[pid]
        if process.next_op() == SNAPSHOT:
            self.last_seen[pid] = self.memory.update_count
        process.step(self.memory)
        self.steps.append(pid)
        self.taken[pid] += 1
        log.debug("step %s: p%s", len(self.steps), pid)
        if process.decision is not None:
            self.decisions[pid] = DecisionRecord(pid, process.decision, len(self.steps), True)
        elif pid in self.crash_plan and self.taken[pid] >= self.crash_plan[pid]:
            self.crash(pid)

    def record(self, *, schedule: str, non_termination: bool, seed: int, label: str) -> AsyncRunRecord:
        views = {
            pid: process.view
            for pid, process in sorted(self.processes.items())
            if process.view is not None
        }
        return AsyncRunRecord(
            cfg=self.cfg,
            initial_values=self.values,
            faulty=frozenset(self.crashed),
            decisions=tuple(self.decisions[pid] for pid in sorted(self.decisions)),
            non_termination=non_termination,
            seed=seed,
            label=label,
            schedule=schedule,
            steps=tuple(self.steps),
            crash_events=tuple(self.crash_events),
            crash_plan=dict(self.crash_plan),
            history=tuple(self.memory.log),
            views=views,  # type: ignore[arg-type]
        )


def run_async(
    protocol: AsyncProtocolFactory,
    cfg: SystemConfig,
    initial_values: Union[Mapping[ProcessId, object], Sequence[object]],
    schedule: Schedule,
    crash_plan: Optional[Mapping[ProcessId, int]] = None,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    label: str = "",
) -> AsyncRunRecord:
    validate_config(cfg)
    values = normalize_initial_values(cfg, initial_values)
    plan = check_crash_plan(cfg, crash_plan or {})
    if isinstance(schedule, ExhaustiveSchedule):
        raise SchedulerError("exhaustive schedules enumerate many runs; use explore_async")

    world = _World(protocol, cfg, values, plan)
    seed = 0

    def budget_left() -> bool:
        return len(world.steps) < step_budget

    if isinstance(schedule, ExplicitSchedule):
        for pid in schedule.steps:
            if world.finished() or not budget_left():
                break
            if pid in world.crashed:
                raise SchedulerError(f"explicit schedule grants a step to crashed process p{pid}")
            if pid in world.decisions:
                continue
            world.step(pid)
        while not world.finished() and budget_left():
            for pid in world.enabled():
                if budget_left() and world.is_enabled(pid):
                    world.step(pid)
    else:
        seed = schedule.seed
        rng = random.Random(schedule.seed)
        while not world.finished() and budget_left():
            order = world.enabled()
            rng.shuffle(order)
            for pid in order:
                for _ in range(rng.choice(_BURSTS)):
                    if not world.is_enabled(pid) or not budget_left():
                        break
                    world.step(pid)

    non_termination = not world.finished()
    if non_termination:
        log.info("run %s hit the step budget of %s", label or "<unnamed>", step_budget)
    return world.record(
        schedule=describe_schedule(schedule), non_termination=non_termination, seed=seed, label=label
    )


def explore_async(
    protocol: AsyncProtocolFactory,
    cfg: SystemConfig,
    initial_values: Union[Mapping[ProcessId, object], Sequence[object]],
    schedule: ExhaustiveSchedule,
    *,
    crashes: bool = True,
    max_runs: Optional[int] = None,
) -> Iterator[AsyncRunRecord]:
    """Every interleaving, and every crash point when ``crashes`` is set, depth first.

    Before the first step every set of at most t processes is crashed in turn; after that a crash
    is only branched on right after the crashing process's own step. Other processes cannot
    observe when a silent process stopped, so later crash points add no new runs.
    Repeated snapshots that would return the same view are pruned. Exploration stops after
    ``max_runs`` leaves.
    """

    validate_config(cfg)
    values = normalize_initial_values(cfg, initial_values)
    label_prefix = describe_schedule(schedule)
    stack: list[_World] = []
    root = _World(protocol, cfg, values, {})
    stack.append(root)
    if crashes:
        for size in range(1, cfg.t + 1):
            for group in itertools.combinations(cfg.pids, size):
                child = copy.deepcopy(root)
                for pid in group:
                    child.crash(pid)
                stack.append(child)

    count = 0
    while stack and (max_runs is None or count < max_runs):
        world = stack.pop()
        children: list[_World] = []
        if not world.finished() and len(world.steps) < schedule.max_steps:
            for pid in world.enabled():
                if world.stutters(pid):
                    continue
                child = copy.deepcopy(world)
                child.step(pid)
                children.append(child)
                if crashes and len(child.crashed) < cfg.t and child.is_enabled(pid):
                    crashed_child = copy.deepcopy(child)
                    crashed_child.crash(pid)
                    children.append(crashed_child)
        if children:
            stack.extend(reversed(children))
            continue
        count += 1
        yield world.record(
            schedule=label_prefix,
            non_termination=not world.finished(),
            seed=0,
            label=f"{label_prefix}#{count}",
        )
