import itertools

import numpy as np
import pytest

from hacss.core import PacketHeader, ServiceCategory, Ticket, TransferSpec, digest
from hacss.director import EndpointDirector
from hacss.packets import AcceptOutcome, EmptyTransfer, PacketManager, ServiceNotPermitted, split_sizes
from hacss.stamps import StampEngine, VerifyOutcome


def manager(cap=1000, endpoints=3):
    d = EndpointDirector(endpoints)
    d.register_client(1, 0x0A000001, 0, 10_000)
    return PacketManager(StampEngine(b"s" * 32), d, cap)


def spec(size, service=ServiceCategory.FILE_UPLOAD):
    return TransferSpec(1, size, "f", digest(b""), service)


def test_ceiling_split():
    assert split_sizes(2500, 1000) == [1000, 1000, 500]
    assert split_sizes(1000, 1000) == [1000]
    plan = manager().plan_transfer(spec(2500), 0x0A000001, 0)
    assert [e.header.payload_len for e in plan.entries] == [1000, 1000, 500]
    assert [e.header.seq for e in plan.entries] == [0, 1, 2]


def test_errors():
    m = manager()
    with pytest.raises(EmptyTransfer):
        m.plan_transfer(spec(0), 1, 0)
    ticket = Ticket(1, frozenset({ServiceCategory.MESSAGE}), 0, 100)
    with pytest.raises(ServiceNotPermitted):
        m.plan_transfer(spec(10), 0x0A000001, 0, ticket)


def test_stamps_and_endpoints_self_consistent():
    rng = np.random.default_rng(4)
    m = manager(cap=64, endpoints=4)
    for _ in range(1000):
        plan = m.plan_transfer(spec(int(rng.integers(1, 300))), 0x0A000001, 5)
        for e in plan.entries:
            assert m.stamps.check(e.stamp, e.header, 5) is VerifyOutcome.OK
            assert e.header.dest == e.endpoint
            assert m.director.lookup(e.endpoint, e.header.source, e.header.plan_id, e.header.seq, 5) is not None


def test_duplicate_and_unknown_plan():
    m = manager()
    plan = m.plan_transfer(spec(2500), 0x0A000001, 0)
    h = plan.entries[0].header
    assert m.accept_packet(h, 1) is AcceptOutcome.TO_STAMP_CHECK
    assert m.accept_packet(h, 1) is AcceptOutcome.DROP_DUPLICATE
    assert m.accept_packet(PacketHeader(999, 0, 1, 1, 0), 1) is AcceptOutcome.DROP_UNKNOWN_PLAN
    assert m.accept_packet(h._replace(seq=3), 1) is AcceptOutcome.DROP_UNKNOWN_PLAN


@pytest.mark.parametrize("order", list(itertools.permutations(range(3))))
def test_any_arrival_order_fills_bitmap(order):
    m = manager()
    plan = m.plan_transfer(spec(2500), 0x0A000001, 0)
    for seq in order:
        assert m.accept_packet(plan.entries[seq].header, 1) is AcceptOutcome.TO_STAMP_CHECK
    assert plan.complete


def test_next_endpoint_included_and_plans_of():
    m = manager()
    plan = m.plan_transfer(spec(100), 0x0A000001, 0)
    assert plan.next_endpoint == m.director.session(1).endpoint
    assert m.plans_of(1) == [plan.plan_id]
    m.drop_plan(plan.plan_id)
    assert m.plans_of(1) == []
