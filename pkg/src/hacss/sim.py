"""Deterministic discrete-event harness.

Honest clients and attackers inject datagrams into one intake FIFO. Each tick
the server drains that FIFO under a budget of ``s`` process units. A datagram
whose cost does not fit in what is left of the tick waits at the head of the
line for the next tick; one that costs more than a whole tick is admitted on a
fresh tick and the excess is carried as debt into the following ticks.

Replies go back over an unattacked return path and arrive one tick later.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import struct
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import ScanRule
from .client import ClientAgent
from .core import (
    HEADER_FORMAT,
    HEADER_SIZE,
    PacketHeader,
    PacketKind,
    ServiceCategory,
    Signature,
    TransferSpec,
    canonical_header_bytes,
    digest,
    parse_header,
)
from .filter import REQUEST_SIZE, FilterOutcome, contact_request, signature_request
from .gateway import GatewayOutcome
from .scenario import CAPTURE_MODELS, AttackerSpec, Scenario, TransferSpecConfig
from .server import CA, Reply, Server, Verdict
from .tickets import ServicePolicy, SivRegistry

HONEST = "honest"
UNPROCESSED = "Unprocessed"
HONEST_BASE = 0x0A00_0001
ATTACK_BASE = 0xC000_0000
_HEADER_FIELDS = ("plan_id", "seq", "payload_len", "source", "dest", "kind")
_FIELD_BITS = dict(zip(_HEADER_FIELDS, (64, 32, 32, 32, 16, 8)))


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Datagram:
    channel: object  # CA or an endpoint id
    source: int
    payload: bytes
    actor: str
    sent: int


@dataclass
class ClassStats:
    injected: int = 0
    processed: int = 0
    units: int = 0
    outcomes: Counter = field(default_factory=Counter)
    acc: int = 0
    acc_expected: int = 0
    acc_unexpected: int = 0
    acc_valid: int = 0
    expected_units: int = 0
    unexpected_units: int = 0

    def to_dict(self) -> dict:
        return {
            "injected": self.injected,
            "processed": self.processed,
            "units": self.units,
            "outcomes": dict(sorted(self.outcomes.items())),
            "acc": self.acc,
            "acc_expected": self.acc_expected,
            "acc_unexpected": self.acc_unexpected,
            "acc_valid": self.acc_valid,
            "expected_units": self.expected_units,
            "unexpected_units": self.unexpected_units,
        }


@dataclass
class SimReport:
    """Everything a run measured. ``to_json`` is byte-stable for a given scenario."""

    scenario: dict
    outcomes: dict[str, int]
    classes: dict[str, dict]
    measured: dict[str, int]
    per_tick: dict[str, list[int]]
    cost_range: dict[str, list[int]]
    gate_samples: list[dict]
    transfers: list[dict]
    events: dict[str, object]
    invariants: dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "outcomes": self.outcomes,
            "classes": self.classes,
            "measured": self.measured,
            "per_tick": self.per_tick,
            "cost_range": self.cost_range,
            "gate_samples": self.gate_samples,
            "transfers": self.transfers,
            "events": self.events,
            "invariants": self.invariants,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["units", "served", "ca_served", "queue", "honest_units", "attacker_units"]
        w.writerow(["tick", *cols])
        for t in range(len(self.per_tick["units"])):
            w.writerow([t, *(self.per_tick[c][t] for c in cols)])
        return buf.getvalue()

    @property
    def attacker_classes(self) -> list[str]:
        return [k for k in self.classes if k != HONEST]

    def attacker_total(self, key: str) -> int:
        return sum(self.classes[k][key] for k in self.attacker_classes)


# -- actors ------------------------------------------------------------------


class HonestClient:
    def __init__(self, sim: Simulation, agent: ClientAgent, transfers, start: int, rng: np.random.Generator):
        self.sim = sim
        self.agent = agent
        self.transfers: tuple[TransferSpecConfig, ...] = transfers
        self.rng = rng
        self.start = start
        self.next_transfer = 0
        self.pending: tuple[TransferSpecConfig, TransferSpec, bytes] | None = None
        self.records: list[dict] = []
        self.renewed = False

    def begin(self, tick: int) -> None:
        self.sim.send(CA, self.agent.source, self.agent.contact(), HONEST, tick)

    def _sign(self, tick: int) -> None:
        self.sim.send(CA, self.agent.source, self.agent.submit_signature(), HONEST, tick)

    def _request(self, tick: int) -> None:
        if self.next_transfer >= len(self.transfers):
            return
        cfg = self.transfers[self.next_transfer]
        self.next_transfer += 1
        content = bytearray(self.rng.bytes(cfg.size))
        if cfg.marker:
            marker = cfg.marker.encode()
            content[: len(marker)] = marker
        content = bytes(content)
        name = cfg.name or f"c{self.agent.client}-t{self.next_transfer - 1}"
        spec = TransferSpec(self.agent.client, cfg.size, name, digest(content), ServiceCategory(cfg.service))
        self.pending = (cfg, spec, content)
        self.records.append(
            {
                "client": self.agent.client,
                "name": name,
                "size": cfg.size,
                "digest": spec.content_digest.hex(),
                "requested": tick,
                "plan_id": None,
            }
        )
        endpoint, datagram = self.agent.transfer_request(spec)
        self.sim.send(endpoint, self.agent.source, datagram, HONEST, tick)

    def _send_fragment(self, tick: int, endpoint: int, datagram: bytes) -> None:
        self.sim.send(endpoint, self.agent.source, datagram, HONEST, tick)

    def on_reply(self, tick: int, reply: Reply) -> None:
        if reply.kind == "public_key":
            retry = reply.body if reply.body is not None else tick
            self.sim.schedule(max(tick, retry), self._sign)
        elif reply.kind == "dispatch":
            self.agent.accept_dispatch(reply.body)
            self._request(tick)
        elif reply.kind == "renew":
            self.renewed = True
        elif reply.kind == "plan":
            cfg, spec, content = self.pending
            view = self.agent.accept_plan(reply.body.sealed)
            self.records[-1]["plan_id"] = view.plan_id
            at = tick
            for i, (endpoint, datagram) in enumerate(self.agent.fragments(view, content)):
                at = tick + i * cfg.interval
                self.sim.schedule(at, self._send_fragment, endpoint, datagram)
            self.sim.schedule(at + cfg.gap, self._request)


class Attacker:
    def __init__(self, sim: Simulation, spec: AttackerSpec, rng: np.random.Generator):
        self.sim = sim
        self.spec = spec
        self.rng = rng
        self.label = spec.model
        self.source = int(rng.integers(ATTACK_BASE, 1 << 32))
        self.signature = self._random_signature()

    def _random_signature(self) -> Signature:
        return Signature.make(int(self.rng.integers(0, 1 << 16)), int(self.rng.integers(0, 1 << 63)))

    def act(self, tick: int) -> None:
        for _ in range(self.spec.rate):
            made = self._make(tick)
            if made is not None:
                channel, src, payload = made
                self.sim.send(channel, src, payload, self.label, tick)
        if tick + 1 < self.sim.stop_of(self.spec):
            self.sim.schedule(tick + 1, self.act)

    def _endpoint(self) -> int:
        return int(self.rng.integers(0, self.sim.sc.I))

    def _make(self, tick: int):
        model = self.spec.model
        if model in CAPTURE_MODELS:
            return self._from_capture()
        if model == "FLOOD_ROTATING_SOURCE":
            src = int(self.rng.integers(ATTACK_BASE, 1 << 32))
        else:
            src = self.source
        if self.spec.channel == "ACC" or self.spec.payload == "forged":
            return self._endpoint(), src, self._forged(src)
        payload = self.spec.payload
        if payload == "contact":
            return CA, src, contact_request()
        if payload == "garbage":
            return CA, src, self.rng.bytes(REQUEST_SIZE)
        if payload == "invalid_signature":
            return CA, src, signature_request(self.signature)
        return CA, src, signature_request(self._random_signature())

    def _forged(self, src: int) -> bytes:
        rng = self.rng
        h = PacketHeader(
            int(rng.integers(0, 1 << 16)),
            int(rng.integers(0, 1 << 8)),
            int(rng.integers(1, 1025)),
            src,
            self._endpoint(),
            PacketKind.DATA,
        )
        return canonical_header_bytes(h) + rng.bytes(h.payload_len + 76 + HEADER_SIZE + 28)

    def _from_capture(self):
        wire = self.sim.wire
        if not wire:
            return None
        rng = self.rng
        endpoint, captured = wire[int(rng.integers(0, len(wire)))]
        header = parse_header(captured)
        target = endpoint if self.spec.targeting == "captured" else self._endpoint()
        model = self.spec.model
        if model == "REPLAYER":
            return target, header.source, captured
        if model == "SPOOFER":
            if rng.random() < 0.5:
                body = rng.bytes(len(captured) - HEADER_SIZE)
                return target, header.source, captured[:HEADER_SIZE] + body
            name = ("payload_len", "dest", "kind")[int(rng.integers(0, 3))]
            forged = _rewrite(header, name, rng)
            return target, forged.source, canonical_header_bytes(forged) + captured[HEADER_SIZE:]
        # MALICIOUS_MUTATOR
        if rng.random() < 0.5:
            name = _HEADER_FIELDS[int(rng.integers(0, len(_HEADER_FIELDS)))]
            mutated = _rewrite_raw(captured, name, rng)
            return target, parse_source(mutated, header.source), mutated
        buf = bytearray(captured)
        at = int(rng.integers(HEADER_SIZE, len(buf)))
        buf[at] ^= int(rng.integers(1, 256))
        return target, header.source, bytes(buf)


def _rewrite(h: PacketHeader, name: str, rng: np.random.Generator) -> PacketHeader:
    if name == "kind":
        return h._replace(kind=PacketKind(1 - int(h.kind)))
    old = getattr(h, name)
    new = old
    while new == old:
        new = int(rng.integers(0, 1 << _FIELD_BITS[name], dtype=np.uint64))
    return h._replace(**{name: new})


def _rewrite_raw(datagram: bytes, name: str, rng: np.random.Generator) -> bytes:
    # Works on raw bytes so the kind byte may take values the parser rejects.
    values = list(struct.unpack_from(HEADER_FORMAT, datagram))
    i = _HEADER_FIELDS.index(name)
    old = values[i]
    while values[i] == old:
        values[i] = int(rng.integers(0, 1 << _FIELD_BITS[name], dtype=np.uint64))
    return struct.pack(HEADER_FORMAT, *values) + datagram[HEADER_SIZE:]


def parse_source(datagram: bytes, default: int) -> int:
    try:
        return parse_header(datagram).source
    except ValueError:
        return default


# -- the harness ---------------------------------------------------------------


class Simulation:
    def __init__(self, sc: Scenario):
        self.sc = sc
        n_attackers = sum(a.count for a in sc.attackers)
        seeds = np.random.SeedSequence(sc.seed).spawn(2 + n_attackers)
        key_rng = np.random.default_rng(seeds[0])
        client_rng = np.random.default_rng(seeds[1])
        e = sc.engine

        registry = SivRegistry()
        agents = []
        serial = 1
        for group in sc.clients:
            for _ in range(group.count):
                sig = Signature.make(group.issuer, serial)
                serial += 1
                pki = key_rng.bytes(32)
                registry.register(sig, pki)
                agents.append((group, ClientAgent(HONEST_BASE + len(agents), sig, pki)))
        for issuer, extra in sc.registry:
            registry.register(Signature.make(issuer, extra), key_rng.bytes(32))
        policy = ServicePolicy(
            {k: frozenset(ServiceCategory(v) for v in vs) for k, vs in sc.policy.items()},
            lifetime=e.ticket_lifetime,
        )
        self.server = Server(
            endpoints=sc.I,
            registry=registry,
            policy=policy,
            capacity=sc.capacity,
            stamp_key=key_rng.bytes(32),
            keygen=lambda: key_rng.bytes(32),
            costs=sc.costs,
            t_fixed=e.t_fixed,
            check_depth=e.B,
            payload_cap=e.payload_cap,
            max_age=e.max_age,
            scan_rules=[ScanRule(r.id, r.marker.encode()) for r in sc.scan_rules],
            header_filter=e.header_filter,
            baseline_served=e.baseline_served,
        )

        self._heap: list = []
        self._order = 0
        self.queue: deque[Datagram] = deque()
        self.wire: list[tuple[int, bytes]] = []
        self.debt = 0
        self.now = 0

        self.honest: dict[int, HonestClient] = {}
        for group, agent in agents:
            actor = HonestClient(self, agent, group.transfers, group.start, client_rng)
            self.honest[agent.source] = actor
            self.schedule(group.start, actor.begin)
        self.attackers: list[Attacker] = []
        k = 2
        for spec in sc.attackers:
            for _ in range(spec.count):
                att = Attacker(self, spec, np.random.default_rng(seeds[k]))
                k += 1
                self.attackers.append(att)
                if spec.rate > 0 and spec.start < self.stop_of(spec):
                    self.schedule(spec.start, att.act)

        self.classes: dict[str, ClassStats] = {HONEST: ClassStats()}
        for spec in sc.attackers:
            self.classes.setdefault(spec.model, ClassStats())
        self.outcomes: Counter = Counter()
        self.cost_range: dict[str, list[int]] = {}
        self.per_tick = {k: [] for k in ("units", "served", "ca_served", "queue", "honest_units", "attacker_units")}
        self.replies = Counter()
        self.opens_unexpected = 0

    def stop_of(self, spec: AttackerSpec) -> int:
        return self.sc.duration if spec.stop is None else min(spec.stop, self.sc.duration)

    def schedule(self, tick: int, fn: Callable, *args) -> None:
        if tick < self.now:
            raise InvariantViolation(f"event scheduled in the past ({tick} < {self.now})")
        heapq.heappush(self._heap, (tick, self._order, fn, args))
        self._order += 1

    def send(self, channel, src: int, payload: bytes, actor: str, tick: int) -> None:
        self.queue.append(Datagram(channel, src, payload, actor, tick))
        self.classes[actor].injected += 1
        if actor == HONEST and channel != CA:
            self.wire.append((channel, payload))

    def _valid_header(self, dg: Datagram, tick: int) -> bool:
        # Would this datagram pass at *some* endpoint? Only asked for attacker traffic.
        try:
            h = parse_header(dg.payload)
        except ValueError:
            return False
        control = h.kind is PacketKind.CONTROL
        director = self.server.director
        exp = director.lookup_any(h.source, None if control else h.plan_id, None if control else h.seq, tick)
        return exp is not None

    def _account(self, dg: Datagram, v: Verdict, valid: bool = False) -> None:
        st = self.classes[dg.actor]
        st.processed += 1
        st.units += v.cost
        st.outcomes[v.outcome] += 1
        self.outcomes[v.outcome] += 1
        lo_hi = self.cost_range.setdefault(v.outcome, [v.cost, v.cost])
        lo_hi[0] = min(lo_hi[0], v.cost)
        lo_hi[1] = max(lo_hi[1], v.cost)
        if dg.channel != CA:
            st.acc += 1
            st.acc_valid += valid
            if v.passed_header:
                st.acc_expected += 1
                st.expected_units += v.cost
            else:
                st.acc_unexpected += 1
                st.unexpected_units += v.cost
                if v.decision.opened:
                    self.opens_unexpected += 1

    def _drain(self, tick: int) -> tuple[int, int, int, int]:
        s = self.sc.s
        pay = min(self.debt, s)
        self.debt -= pay
        budget = s - pay
        used = {HONEST: 0, "attacker": 0}
        served = ca = 0
        while self.queue and budget > 0:
            dg = self.queue[0]
            v = self.server.evaluate(dg.channel, dg.source, dg.payload, tick)
            if v.cost > budget and budget < s:
                break
            self.queue.popleft()
            valid = dg.actor != HONEST and dg.channel != CA and self._valid_header(dg, tick)
            replies = self.server.commit(v, tick)
            charge = min(v.cost, budget)
            budget -= charge
            self.debt += v.cost - charge
            served += 1
            ca += dg.channel == CA
            used[HONEST if dg.actor == HONEST else "attacker"] += v.cost
            self._account(dg, v, valid)
            for r in replies:
                self.replies[r.kind] += 1
                actor = self.honest.get(r.to)
                if actor is not None and dg.actor == HONEST:
                    self.schedule(tick + 1, actor.on_reply, r)
        return s - budget, served, ca, used[HONEST], used["attacker"]

    def run(self) -> SimReport:
        for tick in range(self.sc.duration):
            self.now = tick
            while self._heap and self._heap[0][0] == tick:
                _, _, fn, args = heapq.heappop(self._heap)
                fn(tick, *args)
            units, served, ca, hu, au = self._drain(tick)
            for key, val in zip(self.per_tick, (units, served, ca, len(self.queue), hu, au)):
                self.per_tick[key].append(val)
        for dg in self.queue:
            self.classes[dg.actor].outcomes[UNPROCESSED] += 1
        self.outcomes[UNPROCESSED] += len(self.queue)
        return self._report()

    # -- reporting ------------------------------------------------------------

    def _transfers(self) -> list[dict]:
        delivered = {}
        for d in self.server.assembly.delivered:
            delivered.setdefault(d.plan_id, []).append(d)
        out = []
        for actor in self.honest.values():
            for rec in actor.records:
                got = delivered.get(rec["plan_id"], [])
                out.append(
                    {
                        **rec,
                        "deliveries": len(got),
                        "delivered_tick": got[0].tick if got else None,
                        "digest_ok": bool(got) and all(d.digest.hex() == rec["digest"] for d in got),
                    }
                )
        return out

    def _invariants(self) -> dict[str, bool]:
        injected = sum(c.injected for c in self.classes.values())
        counted = sum(self.outcomes.values())
        per_class = all(c.injected == sum(c.outcomes.values()) for c in self.classes.values())
        s = self.sc.s
        end = self.sc.duration
        director = self.server.director
        director.expire(end)
        return {
            "conservation": injected == counted and per_class,
            "budget_per_tick": all(u <= s for u in self.per_tick["units"]),
            "budget_total": sum(self.per_tick["units"]) <= s * self.sc.duration,
            "director_load": director.load == director.live_counts(end),
            "no_unexpected_opens": self.opens_unexpected == 0,
            "single_delivery": len({d.plan_id for d in self.server.assembly.delivered})
            == len(self.server.assembly.delivered),
        }

    def _report(self) -> SimReport:
        classes = {k: v.to_dict() for k, v in sorted(self.classes.items())}
        attackers = [v for k, v in self.classes.items() if k != HONEST]
        honest = self.classes[HONEST]
        measured = {
            "N_c": honest.processed,
            "N_f": sum(a.processed for a in attackers),
            "N_f_acc": sum(a.acc for a in attackers),
            "N_f_valid": sum(a.acc_valid for a in attackers),
            "N_f_expected": sum(a.acc_expected for a in attackers),
            "N_f_not_expected": sum(a.acc_unexpected for a in attackers),
            "P_c": honest.units,
            "P_f": sum(a.units for a in attackers),
            "attacker_expected_units": sum(a.expected_units for a in attackers),
            "attacker_unexpected_units": sum(a.unexpected_units for a in attackers),
            "units_total": sum(self.per_tick["units"]),
            "carried_debt": self.debt,
            "peak_served_per_tick": max(self.per_tick["served"], default=0),
            "peak_ca_per_tick": max(self.per_tick["ca_served"], default=0),
        }
        srv = self.server
        gw = srv.gateway.stats
        events = {
            "filter_capacity": srv.filter.capacity,
            "tickets_issued": srv.tickets.issued,
            "signatures_rejected": srv.tickets.rejected,
            "siv_calls": srv.registry.calls,
            "notifications": dict(srv.notifications),
            "replies": dict(sorted(self.replies.items())),
            "stamps_issued": srv.stamps.issued,
            "stamps_verified": srv.stamps.verified,
            "gateway_opens": gw.opens,
            "gateway_opens_unexpected": gw.opens_unexpected,
            "blacklist_top": [[s.issuer, s.serial, c] for s, c in srv.filter.blacklist.entries[:10]],
            "blacklist_size": len(srv.filter.blacklist),
            "blacklist_comparisons": srv.filter.blacklist.comparisons,
            "terminations": [list(t) for t in gw.terminations],
            "threats": [list(t) for t in gw.threats],
            "deliveries": [
                [d.client, d.plan_id, d.name, d.size, d.digest.hex(), d.tick] for d in srv.assembly.delivered
            ],
        }
        gate = [
            {"c": c, "n": n, "D": d, "count": cnt} for (c, n, d), cnt in sorted(srv.filter.gate_samples.items())
        ]
        report = SimReport(
            scenario=self.sc.to_dict(),
            outcomes=dict(sorted(self.outcomes.items())),
            classes=classes,
            measured=measured,
            per_tick=self.per_tick,
            cost_range=dict(sorted(self.cost_range.items())),
            gate_samples=gate,
            transfers=self._transfers(),
            events=events,
            invariants=self._invariants(),
        )
        broken = [k for k, ok in report.invariants.items() if not ok]
        if broken:
            raise InvariantViolation(f"invariants violated: {', '.join(broken)}")
        return report


def run(sc: Scenario) -> SimReport:
    """Run one scenario to completion. Same scenario and seed give the same report."""
    return Simulation(sc).run()


GATEWAY_DROPS = tuple(o.value for o in GatewayOutcome if o.value.startswith("Drop"))
FILTER_DROPS = tuple(o.value for o in FilterOutcome if o.value.startswith("Drop"))
