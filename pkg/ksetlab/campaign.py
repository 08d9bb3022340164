"""Fuzz campaigns: many seeded scenarios run through an asyncio worker pool.

Run ``index`` of a campaign is a pure function of (protocol, n, t, index, seed), so any failing run
replays from its scenario echo and seed. Results are keyed by index; the order in which workers
finish never shows in the summary.
"""

from __future__ import annotations

import asyncio
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

from .checker import Verdict, all_passed, distinct_decisions, evaluate
from .model import Protocol, RunRecord, SystemConfig, Value, validate_config
from .scenarios import CRASH, Scenario, StrategySpec, run_scenario, value_label
from .shm_engine import DEFAULT_STEP_BUDGET

log = logging.getLogger(__name__)

DEFAULT_RUNS = 1000
DEFAULT_VALUE_DOMAIN = 3
MAX_CRASH_STEPS = 3


@dataclass(frozen=True)
class RunOutcome:
    index: int
    scenario: Scenario
    verdicts: tuple[Verdict, ...]
    distinct: int
    domain_distinct: int
    record: Optional[RunRecord] = None

    @property
    def passed(self) -> bool:
        return all_passed(self.verdicts)


@dataclass
class CampaignSummary:
    protocol: str
    n: int
    t: int
    seed: int
    runs: int = 0
    max_distinct: int = 0
    max_domain_distinct: int = 0
    verdict_counts: dict[str, Counter] = field(default_factory=dict)
    violations: list[RunOutcome] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def fuzz_scenario(
    protocol: Protocol, n: int, t: int, index: int, seed: int, value_domain: int = DEFAULT_VALUE_DOMAIN
) -> Scenario:
    cfg = SystemConfig(n, t, protocol)
    validate_config(cfg)
    rng = random.Random(f"{protocol.value}:{n}:{t}:{seed}:{index}")
    domain = [value_label(i) for i in range(max(1, value_domain))]
    if rng.random() < 0.2:
        tokens = [rng.choice(domain)] * n
    else:
        tokens = [rng.choice(domain) for _ in range(n)]
    faulty = tuple(sorted(rng.sample(range(n), rng.randint(0, t))))
    adversary: tuple[StrategySpec, ...] = ()
    if faulty and protocol.is_synchronous:
        adversary = (StrategySpec("random_byzantine", faulty, {"seed": rng.randrange(2**31)}),)
    elif faulty:
        adversary = tuple(
            StrategySpec(CRASH, (pid,), {"after_steps": rng.randint(0, MAX_CRASH_STEPS)}) for pid in faulty
        )
    return Scenario(
        cfg=cfg,
        initial_values=tuple(Value.of(token) for token in tokens),
        adversary=adversary,
        seed=rng.randrange(2**31),
        name=f"fuzz-{protocol.value}-{n}-{t}-{seed}#{index}",
    )


def run_one(
    index: int,
    scenario: Scenario,
    *,
    round_slack: int = 1,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> RunOutcome:
    record = run_scenario(scenario, round_slack=round_slack, step_budget=step_budget)
    verdicts = tuple(evaluate(record, scenario.expected))
    passed = all_passed(verdicts)
    return RunOutcome(
        index=index,
        scenario=scenario,
        verdicts=verdicts,
        distinct=len(distinct_decisions(record)),
        domain_distinct=len(distinct_decisions(record, domain_only=True)),
        record=None if passed else record,
    )


async def run_campaign(
    protocol: Protocol,
    n: int,
    t: int,
    runs: int,
    seed: int,
    *,
    concurrency: int = 4,
    value_domain: int = DEFAULT_VALUE_DOMAIN,
    round_slack: int = 1,
    step_budget: int = DEFAULT_STEP_BUDGET,
    progress: Optional[Any] = None,
) -> list[RunOutcome]:
    validate_config(SystemConfig(n, t, protocol))
    worker_count = max(1, concurrency)
    queue: "asyncio.Queue[int | None]" = asyncio.Queue(max(1, worker_count * 2))
    results: dict[int, RunOutcome] = {}

    async def producer() -> None:
        for index in range(runs):
            await queue.put(index)
        for _ in range(worker_count):
            await queue.put(None)

    async def worker() -> None:
        while True:
            index = await queue.get()
            if index is None:
                queue.task_done()
                break
            try:
                scenario = fuzz_scenario(protocol, n, t, index, seed, value_domain)
                outcome = await asyncio.to_thread(
                    run_one, index, scenario, round_slack=round_slack, step_budget=step_budget
                )
                results[index] = outcome
                if progress is not None:
                    progress.update(1)
                    if not outcome.passed:
                        failed = ", ".join(v.name for v in outcome.verdicts if not v.passed)
                        progress.write(f"run {index} violated {failed}")
            finally:
                queue.task_done()

    await asyncio.gather(producer(), *(worker() for _ in range(worker_count)))
    return [results[index] for index in sorted(results)]


def summarize(protocol: Protocol, n: int, t: int, seed: int, outcomes: list[RunOutcome]) -> CampaignSummary:
    summary = CampaignSummary(protocol=protocol.value, n=n, t=t, seed=seed)
    for outcome in sorted(outcomes, key=lambda item: item.index):
        summary.runs += 1
        summary.max_distinct = max(summary.max_distinct, outcome.distinct)
        summary.max_domain_distinct = max(summary.max_domain_distinct, outcome.domain_distinct)
        for verdict in outcome.verdicts:
            key = verdict.name.split(".")[-1] if verdict.name.startswith("trb[") else verdict.name
            summary.verdict_counts.setdefault(key, Counter())["pass" if verdict.passed else "fail"] += 1
        if not outcome.passed:
            summary.violations.append(outcome)
    log.info(
        "campaign %s n=%s t=%s: %s runs, %s violations, max distinct %s",
        protocol.value,
        n,
        t,
        summary.runs,
        len(summary.violations),
        summary.max_distinct,
    )
    return summary
