"""Authenticated client engine: the multi-endpoint intake for ticketed clients.

Datagram = canonical clear header (23 bytes) + body sealed under the per-packet
key. The body of a data packet is ``stamp[76] || inner header[23] || payload``;
the body of a control packet is ``inner header[23] || transfer spec``.

Checks run cheapest first: expectation lookup on the clear header, body open,
inner/clear header comparison, duplicate check, stamp verification, fragment
length. A datagram that fails the first check never costs a body open.

Every datagram is first ``evaluate``d (no state change) to learn its outcome and
cost, then ``commit``ted; the simulator needs the cost before admitting work.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from . import crypto
from .assembly import AssemblyChecker, Clean, Completed, OverflowFragment
from .core import (
    HEADER_SIZE,
    ClientId,
    EndpointId,
    HeaderFormatError,
    PacketHeader,
    PacketKind,
    SourceAddr,
    Stamp,
    Ticket,
    TransferPlan,
    TransferSpec,
    canonical_header_bytes,
    parse_header,
)
from .costs import CostTable
from .director import EndpointDirector, UnknownClient
from .packets import AcceptOutcome, PacketManager, ServiceNotPermitted
from .stamps import STAMP_TOKEN_SIZE, VerifyOutcome

PLAN_ENTRY_FORMAT = ">H"


class TicketExpired(PermissionError):
    pass


class GatewayOutcome(enum.Enum):
    DROP_UNEXPECTED = "DropUnexpected"
    DROP_GARBLED = "DropGarbled"
    DROP_SPOOFED = "DropSpoofed"
    DROP_DUPLICATE = "DropDuplicate"
    DROP_UNKNOWN_PLAN = "DropUnknownPlan"
    DROP_REFUSED = "DropRefused"
    DROP_STALE = "DropStale"
    DROP_MISMATCH = "DropMismatch"
    DROP_STAMP_GARBLED = "DropStampGarbled"
    DROP_OVERFLOW = "DropOverflow"
    FORWARDED = "Forwarded"
    PLAN_DELIVERED = "PlanDelivered"


# Outcomes that end the offending client's session. Only failures that need
# the client's dynamic key to produce are here: a keyless third party can cause
# DropGarbled or DropSpoofed against someone else's source address.
TERMINATING = {
    GatewayOutcome.DROP_UNKNOWN_PLAN,
    GatewayOutcome.DROP_STALE,
    GatewayOutcome.DROP_MISMATCH,
    GatewayOutcome.DROP_STAMP_GARBLED,
    GatewayOutcome.DROP_OVERFLOW,
}

_STAMP_DROPS = {
    VerifyOutcome.STALE: GatewayOutcome.DROP_STALE,
    VerifyOutcome.MISMATCH: GatewayOutcome.DROP_MISMATCH,
    VerifyOutcome.GARBLED: GatewayOutcome.DROP_STAMP_GARBLED,
}


@dataclass
class Session:
    client: ClientId
    source: SourceAddr
    master: crypto.MasterKey
    ticket: Ticket
    ctrl_seq: int = 0
    active: bool = True


@dataclass(frozen=True)
class PlanDelivery:
    """A plan as the client receives it: sealed, with its next endpoint inside."""

    client: ClientId
    plan: TransferPlan
    sealed: bytes


@dataclass
class GatewayDecision:
    outcome: GatewayOutcome
    cost: int
    header: PacketHeader | None = None
    client: ClientId | None = None
    passed_header: bool = False
    opened: bool = False
    payload: bytes = b""
    spec: TransferSpec | None = None
    completes: bool = False
    delivery: PlanDelivery | None = None


@dataclass
class GatewayStats:
    header_passes: int = 0
    opens: int = 0
    opens_unexpected: int = 0
    terminations: list[tuple[int, ClientId, str]] = field(default_factory=list)
    threats: list[tuple[int, ClientId, int, str]] = field(default_factory=list)


def encode_plan(plan: TransferPlan) -> bytes:
    parts = [struct.pack(">QHI", plan.plan_id, plan.next_endpoint, len(plan.entries))]
    for entry in plan.entries:
        parts.append(canonical_header_bytes(entry.header))
        parts.append(struct.pack(PLAN_ENTRY_FORMAT, entry.endpoint))
        parts.append(entry.stamp.token)
    return b"".join(parts)


def decode_plan(data: bytes) -> tuple[int, EndpointId, list[tuple[PacketHeader, EndpointId, Stamp]]]:
    plan_id, next_endpoint, count = struct.unpack_from(">QHI", data)
    off = 14
    entries = []
    for _ in range(count):
        header = parse_header(data[off : off + HEADER_SIZE])
        off += HEADER_SIZE
        (endpoint,) = struct.unpack_from(PLAN_ENTRY_FORMAT, data, off)
        off += 2
        entries.append((header, endpoint, Stamp(bytes(data[off : off + STAMP_TOKEN_SIZE]))))
        off += STAMP_TOKEN_SIZE
    return plan_id, next_endpoint, entries


def reply_key(master: crypto.MasterKey, ctrl_seq: int) -> crypto.DynamicKey:
    # Control replies use plan_id 0 with the high bit of seq set, so they never
    # share a key with any request.
    return crypto.derive_key(master, crypto.packet_counter(0, (1 << 63) | ctrl_seq))


class AuthenticatedClientEngine:
    def __init__(
        self,
        director: EndpointDirector,
        packets: PacketManager,
        assembly: AssemblyChecker,
        costs: CostTable | None = None,
        *,
        header_filter: bool = True,
    ):
        self.director = director
        self.packets = packets
        self.stamps = packets.stamps
        self.assembly = assembly
        self.costs = costs or CostTable()
        self.header_filter = header_filter
        self.sessions: dict[ClientId, Session] = {}
        self.stats = GatewayStats()

    # -- sessions -----------------------------------------------------------

    def open_session(self, client: ClientId, src: SourceAddr, master: crypto.MasterKey, ticket: Ticket) -> None:
        self.sessions[client] = Session(client, src, master, ticket)

    def terminate(self, client: ClientId, now: int, reason: str) -> None:
        session = self.sessions.get(client)
        if session is None or not session.active:
            return
        session.active = False
        self.director.revoke_client(client)
        for plan_id in self.packets.plans_of(client):
            self.packets.drop_plan(plan_id)
            self.assembly.discard(plan_id)
        self.stats.terminations.append((now, client, reason))

    def _live_session(self, client: ClientId, now: int) -> Session:
        session = self.sessions.get(client)
        if session is None or not session.active or not self.director.has_session(client, now):
            raise UnknownClient(client)
        if not session.ticket.live(now):
            raise TicketExpired(client)
        return session

    # -- transfers ----------------------------------------------------------

    def request_transfer(self, client: ClientId, spec: TransferSpec, now: int) -> PlanDelivery:
        session = self._live_session(client, now)
        if not session.ticket.permits(spec.service, now):
            raise ServiceNotPermitted(spec.service.value)
        plan = self.packets.plan_transfer(spec, session.source, now, session.ticket)
        self.assembly.register(plan)
        sealed = crypto.seal(reply_key(session.master, session.ctrl_seq), encode_plan(plan))
        session.ctrl_seq += 1
        return PlanDelivery(client, plan, sealed)

    # -- intake -------------------------------------------------------------

    def _unexpected(self, header: PacketHeader | None = None) -> GatewayDecision:
        cost = self.costs.drop if self.header_filter else self.costs.stamp_check
        return GatewayDecision(GatewayOutcome.DROP_UNEXPECTED, cost, header)

    def evaluate(self, endpoint: EndpointId, datagram: bytes, now: int) -> GatewayDecision:
        c = self.costs
        try:
            header = parse_header(datagram)
        except HeaderFormatError:
            return self._unexpected()
        control = header.kind is PacketKind.CONTROL
        self.director.expire(now)
        exp = self.director.lookup(
            endpoint,
            header.source,
            None if control else header.plan_id,
            None if control else header.seq,
            now,
        )
        if exp is None:
            return self._unexpected(header)
        session = self.sessions.get(exp.client)
        cost = c.header_inspect + c.open_body
        d = GatewayDecision(GatewayOutcome.DROP_GARBLED, cost, header, exp.client, passed_header=True, opened=True)
        if session is None or not session.active:
            return d
        key = crypto.derive_key(session.master, crypto.packet_counter(header.plan_id, header.seq))
        try:
            body = crypto.open_sealed(key, datagram[HEADER_SIZE:])
        except crypto.TamperError:
            return d
        inner_at = 0 if control else STAMP_TOKEN_SIZE
        try:
            inner = parse_header(body[inner_at : inner_at + HEADER_SIZE])
        except HeaderFormatError:
            return d
        if inner != header:
            d.outcome = GatewayOutcome.DROP_SPOOFED
            return d
        d.payload = body[inner_at + HEADER_SIZE :]
        return self._evaluate_control(d, session, now) if control else self._evaluate_data(d, body, now)

    def _evaluate_control(self, d: GatewayDecision, session: Session, now: int) -> GatewayDecision:
        if d.header.plan_id != 0 or d.header.seq != session.ctrl_seq:
            d.outcome = GatewayOutcome.DROP_DUPLICATE
            return d
        try:
            spec = TransferSpec.from_bytes(d.payload)
        except (struct.error, UnicodeDecodeError, IndexError):
            d.outcome = GatewayOutcome.DROP_GARBLED
            return d
        if spec.client != session.client:
            d.outcome = GatewayOutcome.DROP_SPOOFED
            return d
        if spec.total_size <= 0 or not session.ticket.permits(spec.service, now):
            d.outcome = GatewayOutcome.DROP_REFUSED
            return d
        d.spec = spec
        d.outcome = GatewayOutcome.PLAN_DELIVERED
        d.cost += self.costs.plan_packet * -(-spec.total_size // self.packets.payload_cap)
        return d

    def _evaluate_data(self, d: GatewayDecision, body: bytes, now: int) -> GatewayDecision:
        accept = self.packets.check_packet(d.header)
        if accept is AcceptOutcome.DROP_DUPLICATE:
            d.outcome = GatewayOutcome.DROP_DUPLICATE
            return d
        if accept is AcceptOutcome.DROP_UNKNOWN_PLAN:
            d.outcome = GatewayOutcome.DROP_UNKNOWN_PLAN
            return d
        d.cost += self.costs.stamp_check
        verdict = self.stamps.check(Stamp(bytes(body[:STAMP_TOKEN_SIZE])), d.header, now)
        if verdict is not VerifyOutcome.OK:
            d.outcome = _STAMP_DROPS[verdict]
            return d
        try:
            d.completes = self.assembly.check_fragment(d.header.plan_id, d.header.seq, d.payload)
        except (OverflowFragment, KeyError):
            d.outcome = GatewayOutcome.DROP_OVERFLOW
            return d
        if d.completes:
            d.cost += self.costs.scan(self.packets.plans[d.header.plan_id].spec.total_size)
        d.outcome = GatewayOutcome.FORWARDED
        return d

    def commit(self, d: GatewayDecision, now: int) -> PlanDelivery | None:
        """Apply a decision; returns the plan delivery for an accepted control request."""
        st = self.stats
        if d.passed_header:
            st.header_passes += 1
        if d.opened:
            st.opens += 1
            if not d.passed_header:
                st.opens_unexpected += 1
        if d.outcome in _STAMP_DROPS.values():
            self.stamps.verified += 1
        if d.outcome in TERMINATING:
            self.terminate(d.client, now, d.outcome.value)
            return None
        if d.outcome is GatewayOutcome.PLAN_DELIVERED:
            return self.request_transfer(d.client, d.spec, now)
        if d.outcome is GatewayOutcome.FORWARDED:
            self.stamps.verified += 1
            self.packets.accept_packet(d.header, now)
            result = self.assembly.ingest(d.header.plan_id, d.header.seq, d.payload)
            if isinstance(result, Completed):
                plan = self.packets.plans[d.header.plan_id]
                self.director.release_plan(plan.plan_id)
                verdict = self.assembly.scan(result.data)
                if isinstance(verdict, Clean):
                    self.assembly.deliver(plan, result.data, now)
                else:
                    st.threats.append((now, d.client, plan.plan_id, verdict.rule_id))
                    self.terminate(d.client, now, f"Threat:{verdict.rule_id}")
        return None

    def receive(self, endpoint: EndpointId, datagram: bytes, now: int) -> GatewayDecision:
        d = self.evaluate(endpoint, datagram, now)
        d.delivery = self.commit(d, now)
        return d
