"""Ticket engine backed by an in-memory stand-in for the signature authority."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .core import ClientId, ServiceCategory, Signature, SourceAddr, Ticket

DEFAULT_TICKET_LIFETIME = 10_000


class SivRegistry:
    """Set of currently valid signatures, each with the client's sealing key."""

    def __init__(self, entries: Iterable[tuple[Signature, bytes]] = ()):
        self._keys: dict[Signature, bytes] = {}
        self.calls = 0
        for sig, key in entries:
            self.register(sig, key)

    def register(self, sig: Signature, client_key: bytes) -> None:
        self._keys[sig] = client_key

    def __contains__(self, sig: Signature) -> bool:
        return sig in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def validate(self, sig: Signature) -> bool:
        self.calls += 1
        return sig in self._keys

    def client_key(self, sig: Signature) -> bytes:
        return self._keys[sig]

    @property
    def issuers(self) -> set[int]:
        return {sig.issuer for sig in self._keys}


@dataclass
class ServicePolicy:
    services: dict[int, frozenset[ServiceCategory]] = field(default_factory=dict)
    lifetime: int = DEFAULT_TICKET_LIFETIME

    def lookup(self, issuer: int) -> frozenset[ServiceCategory]:
        return self.services.get(issuer, frozenset())


@dataclass(frozen=True)
class Issued:
    ticket: Ticket
    client: ClientId


@dataclass(frozen=True)
class Invalid:
    signature: Signature


AuthOutcome = Issued | Invalid


class TicketEngine:
    """Validates signatures with the authority and issues tickets.

    ``on_issued(client, src, ticket)`` is called exactly once per issued ticket;
    the server wires it to the filter and the endpoint director.
    ``on_invalid(src, sig)`` black-lists the signature and asks for renewal.
    """

    def __init__(
        self,
        registry: SivRegistry,
        policy: ServicePolicy,
        on_issued: Callable[[ClientId, SourceAddr, Ticket], None] | None = None,
        on_invalid: Callable[[SourceAddr, Signature], None] | None = None,
    ):
        missing = registry.issuers - set(policy.services)
        if missing:
            raise ValueError(f"no service policy for issuers {sorted(missing)}")
        self.registry = registry
        self.policy = policy
        self.on_issued = on_issued
        self.on_invalid = on_invalid
        self._next_client = 1
        self.tickets: dict[ClientId, Ticket] = {}
        self.issued = 0
        self.rejected = 0

    def authenticate(self, sig: Signature, src: SourceAddr, now: int) -> AuthOutcome:
        if not self.registry.validate(sig):
            self.rejected += 1
            if self.on_invalid:
                self.on_invalid(src, sig)
            return Invalid(sig)
        client = self._next_client
        self._next_client += 1
        ticket = Ticket(client, self.policy.lookup(sig.issuer), now, now + self.policy.lifetime)
        self.tickets[client] = ticket
        self.issued += 1
        if self.on_issued:
            self.on_issued(client, src, ticket)
        return Issued(ticket, client)
