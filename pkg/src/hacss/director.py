"""Endpoint director: who may send what to which endpoint.

Each endpoint accepts only traffic the director announced for it. A client has
one live session expectation (where its next control request must arrive) and
one expectation per designed packet. Assignment is least-loaded with the
lowest index winning ties.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass

from .core import ClientId, EndpointId, SourceAddr


class UnknownClient(KeyError):
    pass


class Scope(enum.Enum):
    SESSION = "SESSION"
    PACKET = "PACKET"


@dataclass(frozen=True)
class Expectation:
    endpoint: EndpointId
    source: SourceAddr
    client: ClientId
    scope: Scope
    plan_id: int | None
    seq: int | None
    expires_at: int


class EndpointDirector:
    def __init__(self, endpoints: int):
        if endpoints < 1:
            raise ValueError("need at least one endpoint")
        self.endpoints = endpoints
        self.load = [0] * endpoints
        self._sessions: dict[ClientId, Expectation] = {}
        self._session_at: dict[tuple[EndpointId, SourceAddr], ClientId] = {}
        self._packets: dict[tuple[int, int], Expectation] = {}
        self._by_plan: dict[int, list[tuple[int, int]]] = {}
        self._client_plans: dict[ClientId, set[int]] = {}
        self._session_expiry: dict[ClientId, int] = {}
        self._expiry_heap: list[tuple[int, ClientId]] = []
        self.lookups = 0

    # -- bookkeeping --------------------------------------------------------

    def _least_loaded(self) -> EndpointId:
        return min(range(self.endpoints), key=lambda e: (self.load[e], e))

    def _drop_session(self, client: ClientId) -> None:
        old = self._sessions.pop(client, None)
        if old is not None:
            self.load[old.endpoint] -= 1
            self._session_at.pop((old.endpoint, old.source), None)

    def _drop_packet(self, key: tuple[int, int]) -> None:
        exp = self._packets.pop(key, None)
        if exp is not None:
            self.load[exp.endpoint] -= 1

    def expire(self, now: int) -> None:
        """Forget every expectation whose session has expired by ``now``."""
        heap = self._expiry_heap
        while heap and heap[0][0] <= now:
            expires_at, client = heapq.heappop(heap)
            if self._session_expiry.get(client) == expires_at:
                self.revoke_client(client)

    def revoke_client(self, client: ClientId) -> None:
        self._drop_session(client)
        self._session_expiry.pop(client, None)
        for plan_id in list(self._client_plans.pop(client, ())):
            self.release_plan(plan_id)

    def release_plan(self, plan_id: int) -> None:
        """Stop expecting any packet of ``plan_id``."""
        keys = self._by_plan.pop(plan_id, ())
        for key in keys:
            exp = self._packets.get(key)
            if exp is not None:
                self._client_plans.get(exp.client, set()).discard(plan_id)
            self._drop_packet(key)

    # -- operations ---------------------------------------------------------

    @property
    def served(self) -> int:
        """Clients with a live session."""
        return len(self._sessions)

    def has_session(self, client: ClientId, now: int) -> bool:
        self.expire(now)
        return client in self._sessions

    def session(self, client: ClientId) -> Expectation:
        try:
            return self._sessions[client]
        except KeyError:
            raise UnknownClient(client) from None

    def _publish_session(self, client: ClientId, src: SourceAddr, expires_at: int) -> EndpointId:
        # Choose while the current session still counts, so rotation moves away
        # from it unless it is still strictly the least loaded.
        endpoint = self._least_loaded()
        self._drop_session(client)
        exp = Expectation(endpoint, src, client, Scope.SESSION, None, None, expires_at)
        self._sessions[client] = exp
        self._session_at[(endpoint, src)] = client
        self.load[endpoint] += 1
        return endpoint

    def register_client(self, client: ClientId, src: SourceAddr, now: int, expires_at: int) -> EndpointId:
        self.expire(now)
        if expires_at <= now:
            raise ValueError("session already expired")
        self._session_expiry[client] = expires_at
        heapq.heappush(self._expiry_heap, (expires_at, client))
        return self._publish_session(client, src, expires_at)

    def assign_endpoint(self, plan_id: int, seq: int, src: SourceAddr, client: ClientId, now: int) -> EndpointId:
        self.expire(now)
        if client not in self._sessions:
            raise UnknownClient(client)
        key = (plan_id, seq)
        self._drop_packet(key)
        endpoint = self._least_loaded()
        expires_at = self._session_expiry[client]
        self._packets[key] = Expectation(endpoint, src, client, Scope.PACKET, plan_id, seq, expires_at)
        self._by_plan.setdefault(plan_id, []).append(key)
        self._client_plans.setdefault(client, set()).add(plan_id)
        self.load[endpoint] += 1
        return endpoint

    def next_endpoint(self, client: ClientId, now: int) -> EndpointId:
        self.expire(now)
        old = self._sessions.get(client)
        if old is None:
            raise UnknownClient(client)
        return self._publish_session(client, old.source, old.expires_at)

    def lookup(
        self, endpoint: EndpointId, src: SourceAddr, plan_id: int | None, seq: int | None, now: int
    ) -> Expectation | None:
        """The live expectation matching this clear header at ``endpoint``, if any.

        ``plan_id``/``seq`` of None ask for a session expectation.
        """
        self.lookups += 1
        if plan_id is None:
            client = self._session_at.get((endpoint, src))
            exp = None if client is None else self._sessions.get(client)
        else:
            exp = self._packets.get((plan_id, seq))
        if exp is None or exp.endpoint != endpoint or exp.source != src or exp.expires_at <= now:
            return None
        return exp

    def lookup_any(self, src: SourceAddr, plan_id: int | None, seq: int | None, now: int) -> Expectation | None:
        """Like ``lookup`` but at whichever endpoint holds the expectation."""
        if plan_id is None:
            for endpoint in range(self.endpoints):
                client = self._session_at.get((endpoint, src))
                if client is not None:
                    exp = self._sessions.get(client)
                    if exp is not None and exp.expires_at > now:
                        return exp
            return None
        exp = self._packets.get((plan_id, seq))
        if exp is None or exp.source != src or exp.expires_at <= now:
            return None
        return exp

    def is_expected(
        self, endpoint: EndpointId, src: SourceAddr, plan_id: int | None, seq: int | None, now: int
    ) -> bool:
        return self.lookup(endpoint, src, plan_id, seq, now) is not None

    def live_counts(self, now: int) -> list[int]:
        """Recount live expectations per endpoint from scratch (for checking ``load``)."""
        counts = [0] * self.endpoints
        for exp in list(self._sessions.values()) + list(self._packets.values()):
            if exp.expires_at > now:
                counts[exp.endpoint] += 1
        return counts
