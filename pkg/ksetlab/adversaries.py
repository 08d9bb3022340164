"""Byzantine strategies for the synchronous engine.

Most strategies host honest copies ("twins") of the protocol under the Byzantine process's own
signing capability and then withhold, split or rewrite what the twins would send. Twins only ever
sign with coalition capabilities and only relay chains the coalition received, so their output
passes the engine's forgery guard.
"""

from __future__ import annotations

import logging
import random
from typing import Iterable, Mapping, Optional, Sequence

from .authsig import SignedChain, extend, sign
from .model import ProcessId, Value, parse_value
from .sync_engine import (
    Adversary,
    AdversaryContext,
    AdversaryError,
    Body,
    ChainBundle,
    Outgoing,
    RoundMessage,
    SyncProcess,
    VectorBody,
    chains_in,
)

log = logging.getLogger(__name__)


class Silent(Adversary):
    def on_round(self, byz_id, round, inbox, cap):
        return []


class Honest(Adversary):
    """Runs the protocol faithfully while counting as faulty. Base class for twin strategies."""

    def reset(self, context: AdversaryContext) -> None:
        super().reset(context)
        self.twins: dict[ProcessId, SyncProcess] = {
            byz: self._spawn(byz, context.initial_values[byz]) for byz in sorted(self.ids)
        }

    def _spawn(self, byz: ProcessId, value: Value) -> SyncProcess:
        context = self.context
        return context.factory(byz, context.cfg, value, context.caps[byz])

    def _advance(self, twin: SyncProcess, round: int, inbox: Sequence[RoundMessage]) -> list[Outgoing]:
        if round > 1:
            twin.receive(round - 1, inbox)
        return twin.send(round)

    def on_round(self, byz_id, round, inbox, cap):
        return self._advance(self.twins[byz_id], round, inbox)


class CrashAt(Honest):
    """Honest until ``round``; in that round only pids below ``delivered_prefix`` hear from it."""

    def __init__(self, ids: Iterable[ProcessId], round: int, delivered_prefix: int = 0) -> None:
        super().__init__(ids)
        if round < 1:
            raise AdversaryError("crash round must be >= 1")
        self.round = round
        self.delivered_prefix = delivered_prefix

    def on_round(self, byz_id, round, inbox, cap):
        if round > self.round:
            return []
        outgoing = self._advance(self.twins[byz_id], round, inbox)
        if round == self.round:
            outgoing = [out for out in outgoing if out.to < self.delivered_prefix]
        return outgoing


class Equivocator(Honest):
    """One twin per value; each recipient only ever hears the twin assigned to it.

    ``assignment`` maps a recipient to a value, or to ``None`` for round-1 silence. Recipients that
    are silenced or unassigned hear the first twin from round 2 on.
    """

    def __init__(self, byz: ProcessId, assignment: Mapping[ProcessId, Optional[Value]]) -> None:
        super().__init__([byz])
        self.byz = byz
        self.assignment = dict(assignment)

    def reset(self, context: AdversaryContext) -> None:
        Adversary.reset(self, context)
        values = sorted({value for value in self.assignment.values() if value is not None})
        if not values:
            values = [context.initial_values[self.byz]]
        self.primary = values[0]
        self.value_twins = {value: self._spawn(self.byz, value) for value in values}

    def on_round(self, byz_id, round, inbox, cap):
        outgoing: list[Outgoing] = []
        for value, twin in self.value_twins.items():
            for out in self._advance(twin, round, inbox):
                target = self.assignment.get(out.to)
                if round == 1 and target is None:
                    continue
                if (self.primary if target is None else target) == value:
                    outgoing.append(out)
        return outgoing


def equivocator(byz: ProcessId, values: Sequence[Value], n: int) -> Equivocator:
    """Split the recipients into contiguous blocks, block i hearing ``values[i]``."""

    if len(values) < 1:
        raise AdversaryError("an equivocator needs at least one value")
    assignment = {to: values[to * len(values) // n] for to in range(n)}
    return Equivocator(byz, assignment)


class ColumnLiar(Honest):
    """Honest in round 1; in round 2 reports fabricated values in the given vector slots.

    Slots owned by the coalition are re-signed with the owner's capability. A slot owned by a
    correct process cannot be signed, so the fabricated chain is unregistered and the whole message
    is dropped by the forgery guard.
    """

    def __init__(self, byz: ProcessId, fabricated: Mapping[int, Value]) -> None:
        super().__init__([byz])
        self.byz = byz
        self.fabricated = dict(fabricated)

    def on_round(self, byz_id, round, inbox, cap):
        outgoing = self._advance(self.twins[byz_id], round, inbox)
        if round != 2:
            return outgoing
        return [Outgoing(out.to, out.slot, self._rewrite(out.body)) for out in outgoing]

    def _rewrite(self, body: Body) -> Body:
        if not isinstance(body, VectorBody):
            return body
        caps = self.context.caps
        slots = list(body.slots)
        for slot, value in self.fabricated.items():
            if not 0 <= slot < len(slots):
                continue
            if slot in caps:
                slots[slot] = sign(caps[slot], value)
            else:
                log.debug("p%s forges slot %s owned by a correct process", self.byz, slot)
                slots[slot] = SignedChain(value, (slot,))
        return VectorBody(tuple(slots))


class RandomByzantine(Honest):
    """Seeded random mutations of honest twin traffic.

    Each message is kept, dropped or replaced. Replacements draw from the honest chains, received
    chains extended by a coalition signer, and fresh coalition signatures of values seen in the run.
    """

    KEEP, DROP = 0.5, 0.2

    def __init__(self, ids: Iterable[ProcessId], seed: int = 0) -> None:
        super().__init__(ids)
        self.seed = seed

    def reset(self, context: AdversaryContext) -> None:
        super().reset(context)
        self.rngs = {
            byz: random.Random(f"{self.seed}:{context.seed}:{byz}") for byz in sorted(self.ids)
        }
        self.pool = sorted(set(context.initial_values))

    def on_round(self, byz_id, round, inbox, cap):
        rng = self.rngs[byz_id]
        outgoing = self._advance(self.twins[byz_id], round, inbox)
        received = [chain for message in inbox for chain in chains_in(message.body)]
        mutated: list[Outgoing] = []
        for out in outgoing:
            roll = rng.random()
            if roll < self.KEEP:
                mutated.append(out)
            elif roll < self.KEEP + self.DROP:
                continue
            else:
                mutated.append(Outgoing(out.to, out.slot, self._replacement(rng, out.body, received)))
        return mutated

    def _replacement(self, rng: random.Random, body: Body, received: Sequence[SignedChain]) -> Body:
        caps = self.context.caps
        signers = sorted(caps)
        if isinstance(body, VectorBody):
            slots: list[Optional[SignedChain]] = []
            for owner, chain in enumerate(body.slots):
                choice = rng.randrange(3)
                if choice == 0:
                    slots.append(chain)
                elif choice == 1 or owner not in caps:
                    slots.append(None)
                else:
                    slots.append(sign(caps[owner], rng.choice(self.pool)))
            return VectorBody(tuple(slots))

        candidates: list[SignedChain] = list(body.chains)
        for chain in received:
            free = [pid for pid in signers if pid not in chain.signers]
            if free:
                candidates.append(extend(caps[rng.choice(free)], chain))
        signer = rng.choice(signers)
        candidates.append(sign(caps[signer], rng.choice(self.pool)))
        picked = [chain for chain in candidates if rng.random() < 0.5]
        return ChainBundle(tuple(picked))


def silent(ids: Iterable[ProcessId]) -> Silent:
    return Silent(ids)


def honest(ids: Iterable[ProcessId]) -> Honest:
    return Honest(ids)


def crash_at(ids: Iterable[ProcessId], round: int, delivered_prefix: int = 0) -> CrashAt:
    return CrashAt(ids, round, delivered_prefix)


def column_liar(byz: ProcessId, fabricated: Mapping[int, object]) -> ColumnLiar:
    return ColumnLiar(byz, {int(slot): parse_value(value) for slot, value in fabricated.items()})


def random_byzantine(ids: Iterable[ProcessId], seed: int = 0) -> RandomByzantine:
    return RandomByzantine(ids, seed)
