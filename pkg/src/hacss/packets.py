"""Packet manager: designs every packet of a transfer and stops duplicates."""

from __future__ import annotations

import enum

from .core import (
    U32,
    PacketHeader,
    PacketKind,
    PlanEntry,
    SourceAddr,
    Ticket,
    TransferPlan,
    TransferSpec,
)
from .director import EndpointDirector
from .stamps import StampEngine

DEFAULT_PAYLOAD_CAP = 1024


class EmptyTransfer(ValueError):
    pass


class ServiceNotPermitted(PermissionError):
    pass


class AcceptOutcome(enum.Enum):
    TO_STAMP_CHECK = "ToStampCheck"
    DROP_DUPLICATE = "DropDuplicate"
    DROP_UNKNOWN_PLAN = "DropUnknownPlan"


def split_sizes(total_size: int, payload_cap: int) -> list[int]:
    full, rest = divmod(total_size, payload_cap)
    return [payload_cap] * full + ([rest] if rest else [])


class PacketManager:
    def __init__(self, stamps: StampEngine, director: EndpointDirector, payload_cap: int = DEFAULT_PAYLOAD_CAP):
        if not 0 < payload_cap <= U32:
            raise ValueError("payload_cap out of range")
        self.stamps = stamps
        self.director = director
        self.payload_cap = payload_cap
        self.plans: dict[int, TransferPlan] = {}
        self._next_plan = 1

    def plan_transfer(
        self, spec: TransferSpec, source: SourceAddr, now: int, ticket: Ticket | None = None
    ) -> TransferPlan:
        if spec.total_size <= 0:
            raise EmptyTransfer(spec.name)
        if ticket is not None and not ticket.permits(spec.service, now):
            raise ServiceNotPermitted(spec.service.value)
        plan_id = self._next_plan
        self._next_plan += 1
        entries = []
        for seq, size in enumerate(split_sizes(spec.total_size, self.payload_cap)):
            endpoint = self.director.assign_endpoint(plan_id, seq, source, spec.client, now)
            header = PacketHeader(plan_id, seq, size, source, endpoint, PacketKind.DATA)
            entries.append(PlanEntry(header, self.stamps.issue_stamp(header, now), endpoint))
        next_endpoint = self.director.next_endpoint(spec.client, now)
        plan = TransferPlan(plan_id, spec, entries, next_endpoint)
        self.plans[plan_id] = plan
        return plan

    def check_packet(self, header: PacketHeader) -> AcceptOutcome:
        """Classify without recording anything."""
        plan = self.plans.get(header.plan_id)
        if plan is None or header.seq >= len(plan):
            return AcceptOutcome.DROP_UNKNOWN_PLAN
        if plan.has(header.seq):
            return AcceptOutcome.DROP_DUPLICATE
        return AcceptOutcome.TO_STAMP_CHECK

    def accept_packet(self, header: PacketHeader, now: int) -> AcceptOutcome:
        outcome = self.check_packet(header)
        if outcome is AcceptOutcome.TO_STAMP_CHECK:
            self.plans[header.plan_id].mark(header.seq)
        return outcome

    def expected_entry(self, header: PacketHeader) -> PlanEntry:
        return self.plans[header.plan_id].entries[header.seq]

    def drop_plan(self, plan_id: int) -> None:
        self.plans.pop(plan_id, None)
        self.director.release_plan(plan_id)

    def plans_of(self, client: int) -> list[int]:
        return [pid for pid, plan in self.plans.items() if plan.spec.client == client]
