"""Shared vocabulary: values with sentinels, system configuration and k bounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

ProcessId = int
Token = Union[int, str]

BOTTOM_LABEL = "⊥"
SENDER_FAULTY_LABEL = "SF"
RESERVED_LABELS = frozenset({BOTTOM_LABEL, SENDER_FAULTY_LABEL})


class KsetLabError(RuntimeError):
    """Base class for every error raised by ksetlab."""


class InvalidConfigError(KsetLabError):
    """Raised when a ``SystemConfig`` violates one of its invariants."""


class ValueKind(enum.IntEnum):
    DOMAIN = 0
    BOTTOM = 1
    SENDER_FAULTY = 2


@dataclass(frozen=True)
class Value:
    """A proposable value, or one of the two sentinels ⊥ and SF."""

    kind: ValueKind
    token: Optional[Token] = None

    @classmethod
    def of(cls, token: Token) -> "Value":
        if isinstance(token, bool) or not isinstance(token, (int, str)):
            raise TypeError(f"Value tokens must be int or str, got {type(token).__name__}")
        if token in RESERVED_LABELS:
            raise ValueError(f"{token!r} is reserved and cannot be a domain value")
        return cls(ValueKind.DOMAIN, token)

    @property
    def is_domain(self) -> bool:
        return self.kind is ValueKind.DOMAIN

    @property
    def is_bottom(self) -> bool:
        return self.kind is ValueKind.BOTTOM

    def sort_key(self) -> tuple:
        if self.kind is not ValueKind.DOMAIN:
            return (int(self.kind), 0, "")
        if isinstance(self.token, int):
            return (0, 0, self.token)
        return (0, 1, self.token)

    def __lt__(self, other: "Value") -> bool:
        if not isinstance(other, Value):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def label(self) -> Token:
        if self.kind is ValueKind.BOTTOM:
            return BOTTOM_LABEL
        if self.kind is ValueKind.SENDER_FAULTY:
            return SENDER_FAULTY_LABEL
        assert self.token is not None
        return self.token

    def __str__(self) -> str:
        return str(self.label())


BOTTOM = Value(ValueKind.BOTTOM)
SENDER_FAULTY = Value(ValueKind.SENDER_FAULTY)


def parse_value(raw: object) -> Value:
    """Inverse of ``Value.label``."""

    if isinstance(raw, Value):
        return raw
    if raw is None or raw == BOTTOM_LABEL:
        return BOTTOM
    if raw == SENDER_FAULTY_LABEL:
        return SENDER_FAULTY
    return Value.of(raw)  # type: ignore[arg-type]


def canonical(values: Iterable[Value]) -> list[Value]:
    return sorted(set(values))


class Protocol(str, enum.Enum):
    TWO_ROUND = "two_round"
    TRB_OPTIMAL = "trb_optimal"
    ASYNC_SNAPSHOT = "async_snapshot"

    @property
    def is_synchronous(self) -> bool:
        return self is not Protocol.ASYNC_SNAPSHOT


@dataclass(frozen=True)
class SystemConfig:
    n: int
    t: int
    protocol: Protocol

    @property
    def pids(self) -> range:
        return range(self.n)

    @property
    def beyond_half(self) -> bool:
        """True when n ≤ 2t; reported so optimality claims can be read with care."""

        return self.n <= 2 * self.t


def validate_config(cfg: SystemConfig) -> None:
    if cfg.n < 1:
        raise InvalidConfigError("n >= 1 required")
    if cfg.t < 0:
        raise InvalidConfigError("t >= 0 required")
    if cfg.t >= cfg.n:
        raise InvalidConfigError("t < n required")
    if cfg.protocol is Protocol.ASYNC_SNAPSHOT and cfg.n <= 2 * cfg.t:
        raise InvalidConfigError("n > 2t required")


def compute_k_bound(cfg: SystemConfig) -> int:
    """Largest number of distinct decisions the protocol of ``cfg`` may produce.

    For the two synchronous protocols ⊥ is counted; for the snapshot protocol the bound covers
    Domain decisions only.
    """

    validate_config(cfg)
    n, t = cfg.n, cfg.t
    if cfg.protocol is Protocol.TWO_ROUND:
        return n // (n - t) + 1
    if cfg.protocol is Protocol.TRB_OPTIMAL:
        return n // (n - t)
    return (n - t) // (n - 2 * t)


def normalize_initial_values(
    cfg: SystemConfig, initial_values: Union[Mapping[ProcessId, object], Sequence[object]]
) -> tuple[Value, ...]:
    if isinstance(initial_values, Mapping):
        missing = [pid for pid in cfg.pids if pid not in initial_values]
        if missing:
            raise InvalidConfigError(f"initial values missing for processes {missing}")
        raw = [initial_values[pid] for pid in cfg.pids]
    else:
        raw = list(initial_values)
        if len(raw) != cfg.n:
            raise InvalidConfigError(f"expected {cfg.n} initial values, got {len(raw)}")
    values = tuple(parse_value(item) for item in raw)
    for pid, value in enumerate(values):
        if not value.is_domain:
            raise InvalidConfigError(f"initial value of p{pid} must be a domain value, got {value}")
    return values


@dataclass(frozen=True)
class DecisionRecord:
    pid: ProcessId
    decided: Value
    decide_round_or_step: int
    correct: bool = True


@dataclass(frozen=True, kw_only=True)
class RunRecord:
    """Fields common to synchronous and asynchronous run records."""

    cfg: SystemConfig
    initial_values: tuple[Value, ...]
    faulty: frozenset[ProcessId]
    decisions: tuple[DecisionRecord, ...]
    non_termination: bool
    seed: int = 0
    label: str = ""
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def correct(self) -> tuple[ProcessId, ...]:
        return tuple(pid for pid in self.cfg.pids if pid not in self.faulty)

    def decision_of(self, pid: ProcessId) -> Optional[Value]:
        for record in self.decisions:
            if record.pid == pid:
                return record.decided
        return None

    def correct_decisions(self) -> dict[ProcessId, Value]:
        return {d.pid: d.decided for d in self.decisions if d.correct and d.pid not in self.faulty}
