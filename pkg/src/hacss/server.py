"""The two channels wired together: CA (filter + tickets) and ACC (gateway)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from . import crypto
from .assembly import AssemblyChecker, ScanRule
from .core import ClientId, Signature, SourceAddr, Ticket
from .costs import CostTable
from .director import EndpointDirector
from .filter import DEFAULT_CHECK_DEPTH, DEFAULT_T_FIXED, FilterDecision, FilterOutcome, FilterRedirectEngine
from .gateway import AuthenticatedClientEngine, GatewayDecision
from .packets import DEFAULT_PAYLOAD_CAP, PacketManager
from .stamps import DEFAULT_MAX_AGE, FreshnessWindow, StampEngine
from .tickets import Issued, ServicePolicy, SivRegistry, TicketEngine

CA = "CA"


@dataclass
class Reply:
    """Server-to-client message (the return path is not attacked)."""

    to: SourceAddr
    kind: str  # "public_key" | "dispatch" | "renew" | "plan"
    body: object = None


@dataclass
class Verdict:
    channel: object
    source: SourceAddr
    outcome: str
    cost: int
    decision: FilterDecision | GatewayDecision

    @property
    def passed_header(self) -> bool:
        return isinstance(self.decision, GatewayDecision) and self.decision.passed_header


class Server:
    def __init__(
        self,
        *,
        endpoints: int,
        registry: SivRegistry,
        policy: ServicePolicy,
        capacity: int,
        stamp_key: bytes,
        keygen: Callable[[], bytes],
        costs: CostTable | None = None,
        t_fixed: int = DEFAULT_T_FIXED,
        check_depth: int = DEFAULT_CHECK_DEPTH,
        payload_cap: int = DEFAULT_PAYLOAD_CAP,
        max_age: int = DEFAULT_MAX_AGE,
        scan_rules: Iterable[ScanRule] = (),
        header_filter: bool = True,
        baseline_served: int = 0,
    ):
        self.costs = costs or CostTable()
        self.keygen = keygen
        self.baseline_served = baseline_served
        self.registry = registry
        self.director = EndpointDirector(endpoints)
        self.stamps = StampEngine(stamp_key, FreshnessWindow(max_age))
        self.packets = PacketManager(self.stamps, self.director, payload_cap)
        self.assembly = AssemblyChecker(scan_rules)
        self.gateway = AuthenticatedClientEngine(
            self.director, self.packets, self.assembly, self.costs, header_filter=header_filter
        )
        self.filter = FilterRedirectEngine(
            capacity,
            lambda: self.director.served + self.baseline_served,
            registry.client_key,
            t_fixed=t_fixed,
            check_depth=check_depth,
        )
        self.tickets = TicketEngine(registry, policy, self._on_issued, self._on_invalid)
        self._replies: list[Reply] = []
        self.notifications = {"filter": 0, "director": 0}

    # ticket engine callbacks

    def _on_issued(self, client: ClientId, src: SourceAddr, ticket: Ticket) -> None:
        now = ticket.issued_at
        endpoint = self.director.register_client(client, src, now, ticket.expires_at)
        self.notifications["director"] += 1
        master = crypto.MasterKey(self.keygen())
        self.gateway.open_session(client, src, master, ticket)
        record = self.filter.on_authenticated(client, src, master, endpoint)
        self.notifications["filter"] += 1
        self._replies.append(Reply(src, "dispatch", record))

    def _on_invalid(self, src: SourceAddr, sig: Signature) -> None:
        self.filter.on_rejected(src, sig)
        self._replies.append(Reply(src, "renew", sig))

    # intake

    def _filter_cost(self, d: FilterDecision, sig_valid: bool) -> int:
        c = self.costs
        o = d.outcome
        if o in (FilterOutcome.DROP_RATE_LIMITED, FilterOutcome.DROP_ALREADY_AUTHENTICATED):
            return c.drop
        if o is FilterOutcome.DROP_MALFORMED:
            return c.drop if d.signature is None else c.header_inspect
        if o is FilterOutcome.REPLY_PUBLIC_KEY:
            return c.header_inspect + c.plan_packet
        cost = c.header_inspect + d.probes * c.blacklist_probe
        if o is FilterOutcome.FORWARD:
            cost += c.siv_validate + (c.plan_packet if sig_valid else 0)
        return cost

    def evaluate(self, channel, src: SourceAddr, payload: bytes, now: int) -> Verdict:
        if channel == CA:
            d = self.filter.evaluate(payload, src, now)
            valid = d.outcome is FilterOutcome.FORWARD and d.signature in self.registry
            return Verdict(channel, src, d.outcome.value, self._filter_cost(d, valid), d)
        g = self.gateway.evaluate(channel, payload, now)
        return Verdict(channel, src, g.outcome.value, g.cost, g)

    def commit(self, v: Verdict, now: int) -> list[Reply]:
        self._replies = []
        d = v.decision
        if isinstance(d, FilterDecision):
            self.filter.commit(d, v.source)
            if d.outcome is FilterOutcome.REPLY_PUBLIC_KEY:
                self._replies.append(Reply(v.source, "public_key", self.filter.gate.blocked_until(v.source)))
            elif d.outcome is FilterOutcome.FORWARD:
                outcome = self.tickets.authenticate(d.signature, v.source, now)
                assert isinstance(outcome, Issued) == (d.signature in self.registry)
        else:
            delivery = self.gateway.commit(d, now)
            if delivery is not None:
                src = self.gateway.sessions[delivery.client].source
                self._replies.append(Reply(src, "plan", delivery))
        return self._replies

    def handle(self, channel, src: SourceAddr, payload: bytes, now: int) -> tuple[Verdict, list[Reply]]:
        v = self.evaluate(channel, src, payload, now)
        return v, self.commit(v, now)
