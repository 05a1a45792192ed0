"""Messages and files checking: reassembly, whole-content scanning, delivery."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .core import TransferPlan, digest


class OverflowFragment(ValueError):
    """A fragment's length disagrees with the length its plan entry fixed."""


@dataclass(frozen=True)
class ScanRule:
    rule_id: str
    marker: bytes | None = None
    predicate: Callable[[bytes], bool] | None = None

    def matches(self, data: bytes) -> bool:
        if self.marker is not None and self.marker in data:
            return True
        return self.predicate is not None and self.predicate(data)


ScanRuleSet = tuple[ScanRule, ...]


@dataclass(frozen=True)
class Clean:
    pass


@dataclass(frozen=True)
class Threat:
    rule_id: str


@dataclass(frozen=True)
class Buffered:
    pass


@dataclass(frozen=True)
class Completed:
    data: bytes


def scan(assembled: bytes, rules: Iterable[ScanRule]) -> Clean | Threat:
    for rule in rules:
        if rule.matches(assembled):
            return Threat(rule.rule_id)
    return Clean()


@dataclass
class Delivery:
    client: int
    plan_id: int
    name: str
    size: int
    digest: bytes
    tick: int


@dataclass
class _Buffer:
    lengths: list[int]
    fragments: dict[int, bytes] = field(default_factory=dict)


class AssemblyChecker:
    def __init__(self, rules: Iterable[ScanRule] = ()):
        self.rules: ScanRuleSet = tuple(rules)
        self._buffers: dict[int, _Buffer] = {}
        self.delivered: list[Delivery] = []
        self._delivered_plans: set[int] = set()
        self.threats: list[tuple[int, str]] = []

    def register(self, plan: TransferPlan) -> None:
        self._buffers[plan.plan_id] = _Buffer([e.header.payload_len for e in plan.entries])

    def discard(self, plan_id: int) -> None:
        self._buffers.pop(plan_id, None)

    def check_fragment(self, plan_id: int, seq: int, payload: bytes) -> bool:
        """True when this fragment would complete its plan. Raises on length mismatch."""
        buf = self._buffers[plan_id]
        if len(payload) != buf.lengths[seq]:
            raise OverflowFragment(f"plan {plan_id} seq {seq}: {len(payload)} != {buf.lengths[seq]}")
        have = len(buf.fragments) + (seq not in buf.fragments)
        return have == len(buf.lengths)

    def ingest(self, plan_id: int, seq: int, payload: bytes) -> Buffered | Completed:
        self.check_fragment(plan_id, seq, payload)
        buf = self._buffers[plan_id]
        buf.fragments.setdefault(seq, bytes(payload))
        if len(buf.fragments) < len(buf.lengths):
            return Buffered()
        del self._buffers[plan_id]
        return Completed(b"".join(buf.fragments[i] for i in range(len(buf.lengths))))

    def scan(self, assembled: bytes) -> Clean | Threat:
        return scan(assembled, self.rules)

    def deliver(self, plan: TransferPlan, assembled: bytes, tick: int) -> Delivery:
        if plan.plan_id in self._delivered_plans:
            raise RuntimeError(f"plan {plan.plan_id} delivered twice")
        self._delivered_plans.add(plan.plan_id)
        record = Delivery(plan.spec.client, plan.plan_id, plan.spec.name, len(assembled), digest(assembled), tick)
        self.delivered.append(record)
        return record
