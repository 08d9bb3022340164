from itertools import combinations

import pytest

from ksetlab.ksa_snapshot import snapshot_factory
from ksetlab.model import BOTTOM, Protocol, SystemConfig, Value
from ksetlab.shm_engine import (
    SNAPSHOT,
    UPDATE,
    ExhaustiveSchedule,
    ExplicitSchedule,
    SchedulerError,
    SeededSchedule,
    SnapshotObject,
    describe_schedule,
    explore_async,
    run_async,
)

A, B, C = Value.of("a"), Value.of("b"), Value.of("c")
CFG = SystemConfig(3, 1, Protocol.ASYNC_SNAPSHOT)


def test_snapshot_object_linearizes_every_operation():
    memory = SnapshotObject(3)
    memory.update(1, B)
    view = memory.snapshot(0)

    assert view == (BOTTOM, B, BOTTOM)
    assert [(op.index, op.pid, op.kind) for op in memory.log] == [(0, 1, UPDATE), (1, 0, SNAPSHOT)]
    assert memory.update_count == 1


def test_snapshot_object_refuses_crashed_processes_and_sentinels():
    memory = SnapshotObject(2)
    with pytest.raises(ValueError):
        memory.update(0, BOTTOM)
    memory.crash(1)
    with pytest.raises(SchedulerError):
        memory.snapshot(1)


def test_explicit_schedule_with_a_crashed_process():
    record = run_async(snapshot_factory, CFG, ["a", "b", "c"], ExplicitSchedule((0, 1, 0, 1)), {2: 0})

    assert record.faulty == frozenset({2})
    assert record.correct_decisions() == {0: A, 1: B}
    assert record.steps == (0, 1, 0, 1)
    assert record.schedule == "explicit:0,1,0,1"
    assert record.views[0] == (A, B, BOTTOM)


def test_explicit_schedule_cannot_step_a_crashed_process():
    with pytest.raises(SchedulerError):
        run_async(snapshot_factory, CFG, ["a", "b", "c"], ExplicitSchedule((2,)), {2: 0})


def test_crash_plan_is_bounded_by_t():
    with pytest.raises(SchedulerError):
        run_async(snapshot_factory, CFG, ["a", "b", "c"], SeededSchedule(1), {0: 0, 1: 0})
    with pytest.raises(SchedulerError):
        run_async(snapshot_factory, CFG, ["a", "b", "c"], SeededSchedule(1), {5: 0})


def test_a_process_that_decides_before_its_crash_point_is_correct():
    record = run_async(snapshot_factory, CFG, ["a", "b", "c"], ExplicitSchedule((0, 1, 0)), {0: 5})

    assert record.faulty == frozenset()
    assert record.decision_of(0) == A


def test_explicit_schedule_falls_back_to_round_robin():
    record = run_async(snapshot_factory, CFG, ["a", "a", "a"], ExplicitSchedule((1,)))

    assert record.steps[0] == 1
    assert not record.non_termination
    assert set(record.correct_decisions().values()) == {A}


def test_seeded_schedules_replay():
    first = run_async(snapshot_factory, CFG, ["a", "b", "c"], SeededSchedule(9), {2: 1})
    second = run_async(snapshot_factory, CFG, ["a", "b", "c"], SeededSchedule(9), {2: 1})

    assert first.steps == second.steps
    assert first.history == second.history
    assert first.seed == 9


def test_step_budget_exhaustion_is_recorded():
    record = run_async(snapshot_factory, CFG, ["a", "b", "c"], SeededSchedule(0), step_budget=1)

    assert record.non_termination
    assert record.steps_executed == 1


def test_exhaustive_schedule_needs_the_explorer():
    with pytest.raises(SchedulerError):
        run_async(snapshot_factory, CFG, ["a", "b", "c"], ExhaustiveSchedule(10))


def test_describe_schedule():
    assert describe_schedule(SeededSchedule(7)) == "seeded:7"
    assert describe_schedule(ExplicitSchedule((0, 1))) == "explicit:0,1"
    assert describe_schedule(ExhaustiveSchedule(64)) == "exhaustive:64"


def test_explorer_yields_complete_runs():
    runs = list(explore_async(snapshot_factory, CFG, ["a", "b", "c"], ExhaustiveSchedule(64), crashes=False))

    assert len(runs) > 1
    assert all(not record.non_termination for record in runs)
    assert all(record.faulty == frozenset() for record in runs)
    assert len({record.steps for record in runs}) == len(runs)


def test_explorer_crashes_every_small_group_before_the_first_step():
    cfg = SystemConfig(5, 2, Protocol.ASYNC_SNAPSHOT)
    runs = list(explore_async(snapshot_factory, cfg, ["a", "b", "c", "d", "e"], ExhaustiveSchedule(0)))

    assert len(runs) == 1 + 5 + 10
    assert {record.faulty for record in runs} == {
        frozenset(group) for size in range(3) for group in combinations(range(5), size)
    }
    assert all(record.steps == () for record in runs)


def test_explorer_respects_max_runs_and_t():
    runs = list(explore_async(snapshot_factory, CFG, ["a", "b", "c"], ExhaustiveSchedule(64), max_runs=5))
    assert len(runs) == 5

    every = explore_async(snapshot_factory, CFG, ["a", "b", "c"], ExhaustiveSchedule(64))
    assert all(len(record.faulty) <= CFG.t for record in every)
