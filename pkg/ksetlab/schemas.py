"""Scenario files and reports.

Scenario files are validated with ``extra="forbid"`` so that a misspelt key is reported as a field
error rather than silently ignored. Reports render as YAML (``text``) or sorted JSON
(``machine-readable``); both are deterministic for a given record.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .campaign import CampaignSummary, RunOutcome
from .checker import Expectation, Verdict, all_passed, labels, distinct_decisions
from .config import ConfigError, read_structured
from .model import Protocol, RunRecord, SystemConfig, Value, parse_value
from .oracle import OracleSummary
from .scenarios import Scenario, ScenarioError, StrategySpec
from .shm_engine import AsyncRunRecord, LinearizedOp
from .sync_engine import SyncRunRecord

TEXT = "text"
MACHINE_READABLE = "machine-readable"
FORMATS = (TEXT, MACHINE_READABLE)

Token = Union[int, str]


def jsonable(obj: Any) -> Any:
    """Values become their labels, tuples become lists and mapping keys become strings."""

    if isinstance(obj, Value):
        return obj.label()
    if isinstance(obj, dict):
        return {str(key): jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [jsonable(item) for item in obj]
        return sorted(items, key=str) if isinstance(obj, (set, frozenset)) else items
    return obj


class StrategyModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    strategy: str
    ids: List[int]
    params: Dict[str, Any] = Field(default_factory=dict)


class ExpectationModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distinct_max: Optional[int] = None
    distinct_exact: Optional[int] = None
    domain_distinct_max: Optional[int] = None
    domain_distinct_exact: Optional[int] = None
    rounds: Optional[int] = None
    decided: Optional[List[Token]] = None

    def to_expectation(self) -> Expectation:
        return Expectation(
            distinct_max=self.distinct_max,
            distinct_exact=self.distinct_exact,
            domain_distinct_max=self.domain_distinct_max,
            domain_distinct_exact=self.domain_distinct_exact,
            rounds=self.rounds,
            decided=None if self.decided is None else tuple(parse_value(item) for item in self.decided),
        )

    @classmethod
    def from_expectation(cls, expected: Expectation) -> "ExpectationModel":
        return cls(
            distinct_max=expected.distinct_max,
            distinct_exact=expected.distinct_exact,
            domain_distinct_max=expected.domain_distinct_max,
            domain_distinct_exact=expected.domain_distinct_exact,
            rounds=expected.rounds,
            decided=None if expected.decided is None else labels(expected.decided),
        )


class ScenarioFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = ""
    n: int
    t: int
    protocol: Protocol
    values: List[Token]
    adversary: List[StrategyModel] = Field(default_factory=list)
    seed: int = 0
    schedule: Optional[List[int]] = None
    expect: Optional[ExpectationModel] = None

    def to_scenario(self) -> Scenario:
        try:
            values = tuple(Value.of(token) for token in self.values)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc), field="values") from exc
        return Scenario(
            cfg=SystemConfig(self.n, self.t, self.protocol),
            initial_values=values,
            adversary=tuple(
                StrategySpec(item.strategy, tuple(item.ids), dict(item.params)) for item in self.adversary
            ),
            seed=self.seed,
            schedule=None if self.schedule is None else tuple(self.schedule),
            expected=None if self.expect is None else self.expect.to_expectation(),
            name=self.name,
        )

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioFile":
        return cls(
            name=scenario.name,
            n=scenario.cfg.n,
            t=scenario.cfg.t,
            protocol=scenario.cfg.protocol,
            values=[value.label() for value in scenario.initial_values],
            adversary=[
                StrategyModel(strategy=spec.strategy, ids=list(spec.ids), params=jsonable(dict(spec.params)))
                for spec in scenario.adversary
            ],
            seed=scenario.seed,
            schedule=None if scenario.schedule is None else list(scenario.schedule),
            expect=None if scenario.expected is None else ExpectationModel.from_expectation(scenario.expected),
        )


def parse_scenario(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("the scenario root must be a mapping")
    try:
        model = ScenarioFile.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ScenarioError(first["msg"], field=location or None) from exc
    return model.to_scenario()


def load_scenario(path: Path) -> Scenario:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        data = read_structured(path, text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=line) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    except ConfigError as exc:
        raise ScenarioError(str(exc)) from exc
    return parse_scenario(data)


class VerdictModel(BaseModel):
    name: str
    passed: bool
    evidence: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_verdict(cls, verdict: Verdict) -> "VerdictModel":
        return cls(name=verdict.name, passed=verdict.passed, evidence=jsonable(dict(verdict.evidence)))


class DecisionModel(BaseModel):
    pid: int
    decided: Token
    at: int


def message_log(record: RunRecord) -> List[str]:
    if isinstance(record, SyncRunRecord):
        return [str(message) for message in record.messages]
    if isinstance(record, AsyncRunRecord):
        return [_show_op(op) for op in record.history]
    return []


def _show_op(op: LinearizedOp) -> str:
    if op.value is not None:
        return f"op{op.index} p{op.pid} {op.kind} {op.value}"
    view = ", ".join(str(value) for value in op.view or ())
    return f"op{op.index} p{op.pid} {op.kind} [{view}]"


class RunReport(BaseModel):
    scenario: ScenarioFile
    seed: int
    passed: bool
    faulty: List[int]
    decisions: List[DecisionModel]
    distinct: List[Token]
    rounds_executed: Optional[int] = None
    steps_executed: Optional[int] = None
    beyond_half: bool = False
    notes: List[str] = Field(default_factory=list)
    verdicts: List[VerdictModel]
    rejected: List[str] = Field(default_factory=list)
    message_log: List[str] = Field(default_factory=list)
    log_truncated: bool = False

    @classmethod
    def from_record(
        cls, scenario: Scenario, record: RunRecord, verdicts: List[Verdict], *, log_preview: int = 40
    ) -> "RunReport":
        passed = all_passed(verdicts)
        full_log = message_log(record)
        shown = full_log if not passed else full_log[: max(0, log_preview)]
        rejected: List[str] = []
        if isinstance(record, SyncRunRecord):
            rejected = [
                f"r{item.round} p{item.sender}->p{item.to} [{item.slot}] {item.reason}" for item in record.rejected
            ]
        return cls(
            scenario=ScenarioFile.from_scenario(scenario),
            seed=record.seed,
            passed=passed,
            faulty=sorted(record.faulty),
            decisions=[
                DecisionModel(pid=item.pid, decided=item.decided.label(), at=item.decide_round_or_step)
                for item in record.decisions
            ],
            distinct=labels(distinct_decisions(record)),
            rounds_executed=record.rounds_executed if isinstance(record, SyncRunRecord) else None,
            steps_executed=record.steps_executed if isinstance(record, AsyncRunRecord) else None,
            beyond_half=record.cfg.beyond_half,
            notes=list(record.notes),
            verdicts=[VerdictModel.from_verdict(verdict) for verdict in verdicts],
            rejected=rejected,
            message_log=shown,
            log_truncated=len(shown) < len(full_log),
        )


class ViolationModel(BaseModel):
    index: int
    failed: List[str]
    scenario: ScenarioFile
    report: Optional[RunReport] = None


class CampaignReport(BaseModel):
    protocol: str
    n: int
    t: int
    seed: int
    runs: int
    passed: bool
    max_distinct: int
    max_domain_distinct: int
    verdict_counts: Dict[str, Dict[str, int]]
    violations: List[ViolationModel] = Field(default_factory=list)

    @classmethod
    def from_summary(cls, summary: CampaignSummary) -> "CampaignReport":
        return cls(
            protocol=summary.protocol,
            n=summary.n,
            t=summary.t,
            seed=summary.seed,
            runs=summary.runs,
            passed=summary.passed,
            max_distinct=summary.max_distinct,
            max_domain_distinct=summary.max_domain_distinct,
            verdict_counts=_counts(summary.verdict_counts),
            violations=[_violation(outcome) for outcome in summary.violations],
        )


def _violation(outcome: RunOutcome) -> ViolationModel:
    report = None
    if outcome.record is not None:
        report = RunReport.from_record(outcome.scenario, outcome.record, list(outcome.verdicts))
    return ViolationModel(
        index=outcome.index,
        failed=[verdict.name for verdict in outcome.verdicts if not verdict.passed],
        scenario=ScenarioFile.from_scenario(outcome.scenario),
        report=report,
    )


def _counts(raw: Dict[str, Any]) -> Dict[str, Dict[str, int]]:
    return {
        name: {"pass": int(counter.get("pass", 0)), "fail": int(counter.get("fail", 0))}
        for name, counter in sorted(raw.items())
    }


class OracleViolationModel(BaseModel):
    label: str
    failed: List[str]
    faulty: List[int]
    initial_values: List[Token]


class OracleReport(BaseModel):
    space: str
    n: int
    t: int
    runs: int
    passed: bool
    max_distinct: int
    max_domain_distinct: int
    verdict_counts: Dict[str, Dict[str, int]]
    violations: List[OracleViolationModel] = Field(default_factory=list)

    @classmethod
    def from_summary(cls, summary: OracleSummary) -> "OracleReport":
        return cls(
            space=summary.space,
            n=summary.n,
            t=summary.t,
            runs=summary.runs,
            passed=summary.passed,
            max_distinct=summary.max_distinct,
            max_domain_distinct=summary.max_domain_distinct,
            verdict_counts=_counts(summary.verdict_counts),
            violations=[
                OracleViolationModel(
                    label=item.label,
                    failed=item.failed,
                    faulty=item.faulty,
                    initial_values=item.initial_values,  # type: ignore[arg-type]
                )
                for item in summary.violations
            ],
        )


def render(model: BaseModel, fmt: str = TEXT) -> str:
    data = model.model_dump(mode="json", exclude_none=True)
    if fmt == MACHINE_READABLE:
        return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt != TEXT:
        raise ValueError(f"unknown report format {fmt!r}")
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)
