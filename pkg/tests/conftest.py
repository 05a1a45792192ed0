import os

import numpy as np
import pytest

from hacss import crypto
from hacss.client import ClientAgent
from hacss.core import ServiceCategory, Signature
from hacss.costs import CostTable
from hacss.server import CA, Server
from hacss.tickets import ServicePolicy, SivRegistry

ALL_SERVICES = frozenset(ServiceCategory)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def master():
    return crypto.MasterKey(bytes(range(32)))


class World:
    """A server plus honest agents, driven by hand one datagram at a time."""

    def __init__(self, endpoints=4, n_clients=1, services=ALL_SERVICES, capacity=100, **kw):
        self.rng = np.random.default_rng(kw.pop("seed", 0))
        self.agents = []
        registry = SivRegistry()
        for i in range(n_clients):
            sig = Signature.make(1, 1000 + i)
            pki = self.rng.bytes(32)
            registry.register(sig, pki)
            self.agents.append(ClientAgent(0x0A000001 + i, sig, pki))
        self.server = Server(
            endpoints=endpoints,
            registry=registry,
            policy=ServicePolicy({1: frozenset(services)}, lifetime=kw.pop("lifetime", 10_000)),
            capacity=capacity,
            stamp_key=self.rng.bytes(32),
            keygen=lambda: self.rng.bytes(32),
            costs=kw.pop("costs", CostTable()),
            **kw,
        )

    def ca(self, agent, payload, now):
        return self.server.handle(CA, agent.source, payload, now)

    def login(self, agent, now=0):
        """Contact, sign after the block window, accept the dispatch. Returns the tick reached."""
        _, replies = self.ca(agent, agent.contact(), now)
        retry = max(now + 1, replies[0].body)
        v, replies = self.ca(agent, agent.submit_signature(), retry)
        assert v.outcome == "ForwardToTicketEngine", v.outcome
        agent.accept_dispatch(replies[0].body)
        return retry

    def acc(self, endpoint, datagram, now, src=0):
        return self.server.handle(endpoint, src, datagram, now)

    def plan(self, agent, spec, now):
        endpoint, dg = agent.transfer_request(spec)
        v, replies = self.acc(endpoint, dg, now)
        assert v.outcome == "PlanDelivered", v.outcome
        return agent.accept_plan(replies[0].body.sealed)


@pytest.fixture
def world():
    return World()


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def pytest_report_header(config):
    return f"hacss tests, PYTHONHASHSEED={os.environ.get('PYTHONHASHSEED', 'random')}"


ACCEPTANCE_LINES: list[str] = []


class criterion:
    """Record one acceptance line: PASS if the block finishes, FAIL if it raises."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"acceptance {self.number:2d} {status}: {self.title}"
        if self.detail:
            line += f" ({self.detail})"
        if exc_type is not None and exc is not None:
            line += f" -> {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return False


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
