import numpy as np
import pytest

from hacss.director import EndpointDirector, Scope, UnknownClient


def test_tie_goes_to_lowest_index():
    assert EndpointDirector(2).register_client(1, 10, 0, 100) == 0


def test_least_loaded():
    d = EndpointDirector(2)
    d.load[:] = [3, 1]
    assert d.register_client(1, 10, 0, 100) == 1


def test_four_registrations_balance():
    d = EndpointDirector(2)
    for c in range(4):
        d.register_client(c, 10 + c, 0, 100)
    assert d.load == [2, 2]


def test_packet_assignment_balance():
    rng = np.random.default_rng(0)
    d = EndpointDirector(4)
    for c in range(5):
        d.register_client(c, 100 + c, 0, 1000)
    for i in range(100):
        c = int(rng.integers(0, 5))
        d.assign_endpoint(i, 0, 100 + c, c, 1)
    assert max(d.load) - min(d.load) <= 1
    assert d.load == d.live_counts(1)


def test_assign_unknown_client():
    with pytest.raises(UnknownClient):
        EndpointDirector(2).assign_endpoint(1, 0, 5, 99, 0)
    with pytest.raises(UnknownClient):
        EndpointDirector(2).next_endpoint(99, 0)


def test_expectation_lookup_rules():
    d = EndpointDirector(3)
    d.register_client(1, 50, 0, 100)
    e = d.assign_endpoint(7, 0, 50, 1, 0)
    assert d.is_expected(e, 50, 7, 0, 10)
    assert not d.is_expected((e + 1) % 3, 50, 7, 0, 10)
    assert not d.is_expected(e, 51, 7, 0, 10)
    assert not d.is_expected(e, 50, 7, 0, 100)
    assert d.lookup_any(50, 7, 0, 10).endpoint == e


def test_next_endpoint_replaces_session():
    d = EndpointDirector(3)
    first = d.register_client(1, 50, 0, 100)
    d.register_client(2, 60, 0, 100)
    d.assign_endpoint(1, 0, 60, 2, 0)  # lands on endpoint 2
    d.load[first] += 5  # pretend endpoint 0 is busy
    new = d.next_endpoint(1, 1)
    d.load[first] -= 5
    assert new == 1 != first
    assert not d.is_expected(first, 50, None, None, 2)
    assert d.is_expected(new, 50, None, None, 2)
    sessions = [e for e in range(3) if d.is_expected(e, 50, None, None, 2)]
    assert sessions == [new]
    assert d.session(1).scope is Scope.SESSION


def test_single_endpoint_always_zero():
    d = EndpointDirector(1)
    d.register_client(1, 5, 0, 100)
    assert {d.next_endpoint(1, t) for t in range(20)} == {0}


def test_expiry_and_revoke():
    d = EndpointDirector(2)
    d.register_client(1, 5, 0, 10)
    d.assign_endpoint(1, 0, 5, 1, 0)
    d.register_client(2, 6, 0, 50)
    d.assign_endpoint(2, 0, 6, 2, 0)
    d.expire(10)
    assert not d.has_session(1, 10) and d.served == 1
    d.revoke_client(2)
    assert d.load == [0, 0] and d.served == 0


def test_release_plan():
    d = EndpointDirector(2)
    d.register_client(1, 5, 0, 100)
    for s in range(3):
        d.assign_endpoint(9, s, 5, 1, 0)
    d.release_plan(9)
    assert d.load == d.live_counts(0) and sum(d.load) == 1


def test_needs_an_endpoint():
    with pytest.raises(ValueError):
        EndpointDirector(0)
