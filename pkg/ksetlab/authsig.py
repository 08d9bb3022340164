"""Structural signatures and relay chains ``m:p0:p1:...:pi``.

Signatures are not cryptographic. A run owns one ``KeyRing``; every chain built through
``sign``/``extend`` with a capability issued by that key ring is registered in its ledger. The
synchronous engine rejects any chain the ledger does not know, so a chain naming a signer can only
exist if that signer's capability produced it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import KsetLabError, ProcessId, Value

log = logging.getLogger(__name__)


class SignatureError(KsetLabError):
    pass


@dataclass(frozen=True)
class SignedChain:
    payload: Value
    signers: tuple[ProcessId, ...]

    def __post_init__(self) -> None:
        if not self.signers:
            raise SignatureError("a signed chain needs at least one signer")

    @property
    def origin(self) -> ProcessId:
        return self.signers[0]

    def prefix(self, length: int) -> "SignedChain":
        return SignedChain(self.payload, self.signers[:length])

    def __str__(self) -> str:
        return ":".join([str(self.payload), *(f"p{pid}" for pid in self.signers)])


class _Ledger:
    def __init__(self) -> None:
        self.chains: set[SignedChain] = set()
        self.originations: set[tuple[ProcessId, Value]] = set()


class SigningCapability:
    """The only handle through which ``owner`` can be appended to a chain."""

    __slots__ = ("owner", "_ledger")

    def __init__(self, owner: ProcessId, ledger: _Ledger) -> None:
        self.owner = owner
        self._ledger = ledger

    def __repr__(self) -> str:
        return f"SigningCapability(p{self.owner})"


class KeyRing:
    """Issues exactly one capability per process and remembers every legitimate chain."""

    def __init__(self, n: int) -> None:
        self._ledger = _Ledger()
        self._caps = tuple(SigningCapability(pid, self._ledger) for pid in range(n))

    def capability(self, pid: ProcessId) -> SigningCapability:
        return self._caps[pid]

    def is_registered(self, chain: SignedChain) -> bool:
        return chain in self._ledger.chains

    def owns(self, cap: SigningCapability) -> bool:
        return cap._ledger is self._ledger

    @property
    def originations(self) -> frozenset[tuple[ProcessId, Value]]:
        return frozenset(self._ledger.originations)


def sign(cap: SigningCapability, v: Value) -> SignedChain:
    if not v.is_domain:
        raise SignatureError(f"cannot sign sentinel value {v}")
    chain = SignedChain(v, (cap.owner,))
    cap._ledger.chains.add(chain)
    cap._ledger.originations.add((cap.owner, v))
    return chain


def extend(cap: SigningCapability, c: SignedChain) -> SignedChain:
    chain = SignedChain(c.payload, c.signers + (cap.owner,))
    # a forged prefix stays forged
    if c in cap._ledger.chains:
        cap._ledger.chains.add(chain)
    else:
        log.debug("p%s extended unregistered chain %s", cap.owner, c)
    return chain


def is_valid(c: SignedChain, designated_sender: ProcessId, receive_round: int) -> bool:
    if receive_round < 1:
        raise ValueError("receive_round must be >= 1")
    signers = c.signers
    return (
        c.payload.is_domain
        and signers[0] == designated_sender
        and len(set(signers)) == len(signers)
        and len(signers) >= receive_round
    )


def single_signed(c: Optional[SignedChain], signer: ProcessId) -> Optional[Value]:
    """Payload of ``c`` when it is a one-signature chain by ``signer``, else ``None``."""

    if c is None or c.signers != (signer,) or not c.payload.is_domain:
        return None
    return c.payload


def last_index_of(c: SignedChain, members: Iterable[ProcessId]) -> int:
    wanted = set(members)
    for index in range(len(c.signers) - 1, -1, -1):
        if c.signers[index] in wanted:
            return index
    return -1
