"""Filter and redirect engine: the only window open to unauthenticated traffic.

Requests are fixed-size, unencrypted, and cheap to reject. Processing order is
fixed (format, source gate, authenticated source, contact, signature format,
black list, forward) so that every drop happens at the earliest possible stage.

Request wire format (exactly 256 bytes)::

    magic[4] = b"HACS" | phase[1] | payload | zero padding

Phase 0 is initial contact (empty payload). Phase 1 carries a signature as
``issuer[2] serial[8] checksum[2]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from . import crypto
from .core import SIGNATURE_WIRE_SIZE, ClientId, EndpointId, Signature, SourceAddr

REQUEST_SIZE = 256
MAGIC = b"HACS"
PHASE_CONTACT = 0
PHASE_SIGNATURE = 1
DEFAULT_CHECK_DEPTH = 64
DEFAULT_T_FIXED = 10


class CapacityZero(ValueError):
    """The block window is undefined when the system can serve no clients."""


class UnknownSource(KeyError):
    """No pending authentication exists for this source."""


def block_duration(t_fixed: int, c: int, n: int) -> int:
    """Dynamic per-source block time ``ceil(t_fixed * c / n)``."""
    if n == 0:
        raise CapacityZero("served-capacity n is zero")
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    return -(-t_fixed * c // n)


def contact_request() -> bytes:
    return (MAGIC + bytes([PHASE_CONTACT])).ljust(REQUEST_SIZE, b"\x00")


def signature_request(sig: Signature) -> bytes:
    return (MAGIC + bytes([PHASE_SIGNATURE]) + sig.to_bytes()).ljust(REQUEST_SIZE, b"\x00")


class FilterOutcome(enum.Enum):
    FORWARD = "ForwardToTicketEngine"
    REPLY_PUBLIC_KEY = "ReplyPublicKey"
    DROP_MALFORMED = "DropMalformed"
    DROP_RATE_LIMITED = "DropRateLimited"
    DROP_BLACKLISTED = "DropBlacklisted"
    DROP_ALREADY_AUTHENTICATED = "DropAlreadyAuthenticated"

    @property
    def is_drop(self) -> bool:
        return self.value.startswith("Drop")


@dataclass
class FilterDecision:
    outcome: FilterOutcome
    signature: Signature | None = None
    rank: int | None = None
    probes: int = 0
    # Gate update applied on commit; None when the request never got past it.
    blocked_until: int | None = None
    load: tuple[int, int, int] | None = None  # (c, n, D) sampled for the gate


class BlackSignatureList:
    """Invalid signatures kept sorted by sighting count, most frequent first.

    Ties keep insertion order. Only the first ``check_depth`` rows are probed.
    """

    def __init__(self, check_depth: int = DEFAULT_CHECK_DEPTH):
        self.check_depth = check_depth
        self._rows: list[list] = []  # [signature, count, insertion_no]
        self._pos: dict[Signature, int] = {}
        self._inserted = 0
        self.comparisons = 0

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, sig: Signature) -> bool:
        return sig in self._pos

    @property
    def entries(self) -> list[tuple[Signature, int]]:
        return [(sig, count) for sig, count, _ in self._rows]

    def count(self, sig: Signature) -> int:
        i = self._pos.get(sig)
        return 0 if i is None else self._rows[i][1]

    def rank(self, sig: Signature) -> int | None:
        i = self._pos.get(sig)
        return None if i is None else i + 1

    def probe(self, sig: Signature) -> tuple[int | None, int]:
        """Scan the top rows; return (1-based rank or None, comparisons made)."""
        made = 0
        for i in range(min(self.check_depth, len(self._rows))):
            made += 1
            if self._rows[i][0] == sig:
                self.comparisons += made
                return i + 1, made
        self.comparisons += made
        return None, made

    def insert(self, sig: Signature) -> int:
        """Count one more sighting of ``sig`` and return its new rank."""
        i = self._pos.get(sig)
        if i is None:
            self._rows.append([sig, 1, self._inserted])
            self._inserted += 1
            i = len(self._rows) - 1
            self._pos[sig] = i
        else:
            self._rows[i][1] += 1
        rows = self._rows
        row = rows[i]
        key = (-row[1], row[2])
        while i > 0 and (-rows[i - 1][1], rows[i - 1][2]) > key:
            rows[i] = rows[i - 1]
            self._pos[rows[i][0]] = i
            i -= 1
        rows[i] = row
        self._pos[row[0]] = i
        return i + 1


class SourceGate:
    """One processed request per source per dynamic block window."""

    def __init__(self):
        self._blocked_until: dict[SourceAddr, int] = {}

    def blocked(self, src: SourceAddr, now: int) -> bool:
        return self._blocked_until.get(src, -1) > now

    def block(self, src: SourceAddr, until: int) -> None:
        self._blocked_until[src] = until

    def blocked_until(self, src: SourceAddr) -> int | None:
        return self._blocked_until.get(src)

    def purge(self, now: int) -> None:
        self._blocked_until = {s: t for s, t in self._blocked_until.items() if t > now}


@dataclass(frozen=True)
class DispatchRecord:
    """What a freshly authenticated client receives over the CA channel."""

    client: ClientId
    source: SourceAddr
    sealed_master: bytes
    next_endpoint: EndpointId


class FilterRedirectEngine:
    def __init__(
        self,
        capacity: int,
        served: Callable[[], int],
        client_key: Callable[[Signature], bytes],
        *,
        t_fixed: int = DEFAULT_T_FIXED,
        check_depth: int = DEFAULT_CHECK_DEPTH,
        public_key: bytes = b"hacss-public-key",
    ):
        if capacity <= 0:
            raise CapacityZero("served-capacity n is zero")
        self.capacity = capacity
        self.t_fixed = t_fixed
        self.public_key = public_key
        self.blacklist = BlackSignatureList(check_depth)
        self.gate = SourceGate()
        self._served = served
        self._client_key = client_key
        self.pending: dict[SourceAddr, Signature] = {}
        self.authenticated: dict[SourceAddr, ClientId] = {}
        self.outbox: list[DispatchRecord] = []
        # (c, n, D) -> number of gate updates made with that load sample
        self.gate_samples: dict[tuple[int, int, int], int] = {}

    def current_block(self) -> tuple[int, int, int]:
        n = self.capacity
        c = min(self._served(), n)
        return c, n, block_duration(self.t_fixed, c, n)

    def evaluate(self, raw: bytes, src: SourceAddr, now: int) -> FilterDecision:
        """Decide a request's fate without changing any state."""
        if len(raw) != REQUEST_SIZE or raw[:4] != MAGIC or raw[4] not in (PHASE_CONTACT, PHASE_SIGNATURE):
            return FilterDecision(FilterOutcome.DROP_MALFORMED)
        phase = raw[4]
        payload_end = 5 if phase == PHASE_CONTACT else 5 + SIGNATURE_WIRE_SIZE
        if any(raw[payload_end:]):
            return FilterDecision(FilterOutcome.DROP_MALFORMED)
        if self.gate.blocked(src, now):
            return FilterDecision(FilterOutcome.DROP_RATE_LIMITED)

        load = self.current_block()
        until = now + load[2]
        if src in self.authenticated or src in self.pending:
            return FilterDecision(FilterOutcome.DROP_ALREADY_AUTHENTICATED, blocked_until=until, load=load)
        if phase == PHASE_CONTACT:
            return FilterDecision(FilterOutcome.REPLY_PUBLIC_KEY, blocked_until=until, load=load)

        sig = Signature.from_bytes(raw[5:payload_end])
        if not sig.well_formed:
            return FilterDecision(FilterOutcome.DROP_MALFORMED, signature=sig, blocked_until=until, load=load)
        rank, probes = self._probe(sig)
        if rank is not None:
            return FilterDecision(
                FilterOutcome.DROP_BLACKLISTED, sig, rank, probes, blocked_until=until, load=load
            )
        return FilterDecision(FilterOutcome.FORWARD, sig, None, probes, blocked_until=until, load=load)

    def _probe(self, sig: Signature) -> tuple[int | None, int]:
        # Pure variant of BlackSignatureList.probe (no counter update).
        rows = self.blacklist._rows
        depth = min(self.blacklist.check_depth, len(rows))
        for i in range(depth):
            if rows[i][0] == sig:
                return i + 1, i + 1
        return None, depth

    def commit(self, decision: FilterDecision, src: SourceAddr) -> None:
        if decision.blocked_until is not None:
            self.gate.block(src, decision.blocked_until)
            self.gate_samples[decision.load] = self.gate_samples.get(decision.load, 0) + 1
        self.blacklist.comparisons += decision.probes
        if decision.outcome is FilterOutcome.DROP_BLACKLISTED:
            self.blacklist.insert(decision.signature)
        elif decision.outcome is FilterOutcome.FORWARD:
            self.pending[src] = decision.signature

    def handle_request(self, raw: bytes, src: SourceAddr, now: int) -> FilterDecision:
        decision = self.evaluate(raw, src, now)
        self.commit(decision, src)
        return decision

    def blacklist_insert(self, sig: Signature) -> int:
        return self.blacklist.insert(sig)

    def on_rejected(self, src: SourceAddr, sig: Signature) -> int:
        """The SIV rejected ``sig``: black-list it and let the source retry later."""
        self.pending.pop(src, None)
        return self.blacklist_insert(sig)

    def on_authenticated(
        self, client: ClientId, src: SourceAddr, master: crypto.MasterKey, next_endpoint: EndpointId
    ) -> DispatchRecord:
        sig = self.pending.pop(src, None)
        if sig is None:
            raise UnknownSource(src)
        self.authenticated[src] = client
        sealed = crypto.seal(self._client_key(sig), master.secret)
        record = DispatchRecord(client, src, sealed, next_endpoint)
        self.outbox.append(record)
        return record

    def forget(self, src: SourceAddr) -> None:
        """Session over: the source may authenticate again."""
        self.authenticated.pop(src, None)
