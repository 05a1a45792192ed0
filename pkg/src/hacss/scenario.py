"""Scenario files: schema, defaults and validation.

A scenario is a JSON object. Only ``I``, ``s`` and ``duration`` are required;
everything else has a default. Unknown keys are rejected so typos surface.

.. code-block:: json

    {
      "name": "flood-demo", "seed": 1, "I": 4, "s": 1200, "duration": 300,
      "costs":  {"header_inspect": 1, "drop": 1, "open_body": 3, "stamp_check": 5,
                 "siv_validate": 10, "blacklist_probe": 1, "plan_packet": 2, "scan_kb": 1},
      "engine": {"p": 12, "B": 64, "t_fixed": 10, "payload_cap": 1024, "max_age": 500,
                 "ticket_lifetime": 10000, "baseline_served": 0, "header_filter": true},
      "policy": {"1": ["MESSAGE", "FILE_UPLOAD"]},
      "registry": [{"issuer": 1, "serial": 99}],
      "scan_rules": [{"id": "eicar", "marker": "X5O!P%@AP"}],
      "clients": [{"count": 2, "issuer": 1, "start": 0,
                   "transfers": [{"size": 2500, "service": "FILE_UPLOAD",
                                  "interval": 0, "gap": 5, "marker": null}]}],
      "attackers": [{"model": "REPLAYER", "count": 1, "rate": 5, "start": 10,
                     "stop": 200, "targeting": "uniform"}]
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .core import ServiceCategory
from .costs import CostTable

ATTACKER_MODELS = (
    "FLOOD_FIXED_SOURCE",
    "FLOOD_ROTATING_SOURCE",
    "MALICIOUS_MUTATOR",
    "REPLAYER",
    "SPOOFER",
)
CAPTURE_MODELS = ("MALICIOUS_MUTATOR", "REPLAYER", "SPOOFER")
FLOOD_PAYLOADS = ("contact", "garbage", "invalid_signature", "random_signature", "forged")


class ConfigInvalid(ValueError):
    """Scenario failed to parse or validate; ``problems`` lists (field, message)."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{f}: {m}" for f, m in problems))


@dataclass(frozen=True)
class Engine:
    p: int = 12
    B: int = 64
    t_fixed: int = 10
    payload_cap: int = 1024
    max_age: int = 500
    ticket_lifetime: int = 10_000
    baseline_served: int = 0
    header_filter: bool = True


@dataclass(frozen=True)
class TransferSpecConfig:
    size: int
    service: str = "FILE_UPLOAD"
    interval: int = 0
    gap: int = 1
    marker: str | None = None
    name: str | None = None


@dataclass(frozen=True)
class ClientGroup:
    count: int = 1
    issuer: int = 1
    start: int = 0
    transfers: tuple[TransferSpecConfig, ...] = ()


@dataclass(frozen=True)
class AttackerSpec:
    model: str
    count: int = 1
    rate: int = 1
    start: int = 0
    stop: int | None = None
    targeting: str = "uniform"
    channel: str = "CA"
    payload: str = "contact"


@dataclass(frozen=True)
class ScanRuleConfig:
    id: str
    marker: str


@dataclass(frozen=True)
class Scenario:
    I: int  # noqa: E741
    s: int
    duration: int
    seed: int = 0
    name: str = "scenario"
    costs: CostTable = field(default_factory=CostTable)
    engine: Engine = field(default_factory=Engine)
    policy: dict[int, tuple[str, ...]] = field(default_factory=lambda: {1: ("MESSAGE", "FILE_UPLOAD", "QUERY")})
    registry: tuple[tuple[int, int], ...] = ()
    scan_rules: tuple[ScanRuleConfig, ...] = ()
    clients: tuple[ClientGroup, ...] = ()
    attackers: tuple[AttackerSpec, ...] = ()

    @property
    def capacity(self) -> int:
        return self.s // self.engine.p if self.engine.p > 0 else 0

    def with_seed(self, seed: int) -> Scenario:
        return _replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "I": self.I,
            "s": self.s,
            "duration": self.duration,
            "costs": self.costs.to_dict(),
            "engine": {f.name: getattr(self.engine, f.name) for f in fields(Engine)},
            "policy": {str(k): list(v) for k, v in sorted(self.policy.items())},
            "registry": [{"issuer": i, "serial": s} for i, s in self.registry],
            "scan_rules": [{"id": r.id, "marker": r.marker} for r in self.scan_rules],
            "clients": [
                {
                    "count": g.count,
                    "issuer": g.issuer,
                    "start": g.start,
                    "transfers": [{f.name: getattr(t, f.name) for f in fields(t)} for t in g.transfers],
                }
                for g in self.clients
            ],
            "attackers": [{f.name: getattr(a, f.name) for f in fields(a)} for a in self.attackers],
        }


def _replace(sc: Scenario, **changes) -> Scenario:
    import dataclasses

    return dataclasses.replace(sc, **changes)


def _build(cls, data: dict, where: str, problems: list):
    if not isinstance(data, dict):
        problems.append((where, "must be an object"))
        return None
    names = {f.name for f in fields(cls)}
    extra = sorted(set(data) - names)
    for key in extra:
        problems.append((f"{where}.{key}" if where else key, "unknown field"))
    try:
        return cls(**{k: v for k, v in data.items() if k in names})
    except TypeError as exc:
        problems.append((where or "<root>", str(exc)))
        return None


def from_dict(raw: dict) -> Scenario:
    """Parse and validate; raises ``ConfigInvalid`` listing every problem found."""
    problems: list[tuple[str, str]] = []
    if not isinstance(raw, dict):
        raise ConfigInvalid([("<root>", "scenario must be a JSON object")])
    data = copy.deepcopy(raw)
    for key in ("I", "s", "duration"):
        if key not in data:
            problems.append((key, "required"))
    if problems:
        raise ConfigInvalid(problems)

    costs = _build(CostTable, data.pop("costs", {}), "costs", problems)
    engine = _build(Engine, data.pop("engine", {}), "engine", problems)
    policy_raw = data.pop("policy", None)
    registry_raw = data.pop("registry", [])
    rules_raw = data.pop("scan_rules", [])
    clients_raw = data.pop("clients", [])
    attackers_raw = data.pop("attackers", [])

    policy = None
    if policy_raw is not None:
        if not isinstance(policy_raw, dict):
            problems.append(("policy", "must map issuer id to a list of services"))
        else:
            policy = {}
            for k, v in policy_raw.items():
                try:
                    policy[int(k)] = tuple(v)
                except (TypeError, ValueError):
                    problems.append((f"policy.{k}", "issuer id must be an integer"))

    registry = []
    for i, r in enumerate(registry_raw if isinstance(registry_raw, list) else []):
        if not isinstance(r, dict) or set(r) != {"issuer", "serial"}:
            problems.append((f"registry[{i}]", "need exactly issuer and serial"))
        else:
            registry.append((r["issuer"], r["serial"]))
    rules = [_build(ScanRuleConfig, r, f"scan_rules[{i}]", problems) for i, r in enumerate(rules_raw)]

    clients = []
    for i, g in enumerate(clients_raw):
        if isinstance(g, dict):
            g = dict(g)
            g["transfers"] = tuple(
                _build(TransferSpecConfig, t, f"clients[{i}].transfers[{j}]", problems)
                for j, t in enumerate(g.get("transfers", []))
            )
        clients.append(_build(ClientGroup, g, f"clients[{i}]", problems))
    attackers = [_build(AttackerSpec, a, f"attackers[{i}]", problems) for i, a in enumerate(attackers_raw)]

    top = {k: v for k, v in data.items()}
    sc = None
    if not problems:
        extra = sorted(set(top) - {"I", "s", "duration", "seed", "name"})
        for key in extra:
            problems.append((key, "unknown field"))
    if not problems:
        kwargs = dict(
            costs=costs,
            engine=engine,
            registry=tuple(registry),
            scan_rules=tuple(rules),
            clients=tuple(clients),
            attackers=tuple(attackers),
        )
        if policy is not None:
            kwargs["policy"] = policy
        sc = Scenario(**top, **kwargs)
        problems.extend(validate(sc))
    if problems:
        raise ConfigInvalid(problems)
    return sc


def _int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate(sc: Scenario) -> list[tuple[str, str]]:
    """Invariant checks on an already-built scenario."""
    out: list[tuple[str, str]] = []

    def need(ok: bool, where: str, msg: str):
        if not ok:
            out.append((where, msg))

    need(_int(sc.I) and sc.I >= 1, "I", "endpoint count must be an integer >= 1")
    need(_int(sc.I) and sc.I <= 0xFFFF, "I", "endpoint count must fit in 16 bits")
    need(_int(sc.s) and sc.s > 0, "s", "process units per tick must be > 0")
    need(_int(sc.duration) and sc.duration > 0, "duration", "must be > 0")
    need(_int(sc.seed) and sc.seed >= 0, "seed", "must be a non-negative integer")
    for name, msg in [(p.split(" ")[0], p) for p in sc.costs.problems()]:
        out.append((name, msg))
    e = sc.engine
    need(_int(e.p) and e.p > 0, "engine.p", "processes per request must be > 0")
    if _int(sc.s) and _int(e.p) and e.p > 0 and sc.s > 0:
        need(sc.capacity >= 1, "engine.p", "s // p must be >= 1 so the block window is defined")
    need(_int(e.B) and e.B >= 0, "engine.B", "must be >= 0")
    need(_int(e.t_fixed) and e.t_fixed >= 0, "engine.t_fixed", "must be >= 0")
    need(_int(e.payload_cap) and 0 < e.payload_cap <= 0xFFFF_FFFF, "engine.payload_cap", "must be > 0")
    need(_int(e.max_age) and e.max_age > 0, "engine.max_age", "must be > 0")
    need(_int(e.ticket_lifetime) and e.ticket_lifetime > 0, "engine.ticket_lifetime", "must be > 0")
    need(_int(e.baseline_served) and e.baseline_served >= 0, "engine.baseline_served", "must be >= 0")
    need(isinstance(e.header_filter, bool), "engine.header_filter", "must be a boolean")
    services = {c.value for c in ServiceCategory}
    for issuer, granted in sc.policy.items():
        need(0 <= issuer <= 0xFFFF, f"policy.{issuer}", "issuer id must fit in 16 bits")
        need(len(granted) > 0, f"policy.{issuer}", "must grant at least one service")
        for svc in granted:
            need(svc in services, f"policy.{issuer}", f"unknown service {svc!r}")
    for i, (issuer, serial) in enumerate(sc.registry):
        need(issuer in sc.policy, f"registry[{i}].issuer", "no policy row for this issuer")
        need(_int(serial) and 0 <= serial <= 0xFFFF_FFFF_FFFF_FFFF, f"registry[{i}].serial", "must be a u64")
    for i, r in enumerate(sc.scan_rules):
        need(isinstance(r.marker, str) and r.marker != "", f"scan_rules[{i}].marker", "must be a non-empty string")
    for i, g in enumerate(sc.clients):
        w = f"clients[{i}]"
        need(_int(g.count) and g.count >= 0, f"{w}.count", "must be >= 0")
        need(g.issuer in sc.policy, f"{w}.issuer", "no policy row for this issuer")
        need(_int(g.start) and g.start >= 0, f"{w}.start", "must be >= 0")
        for j, t in enumerate(g.transfers):
            tw = f"{w}.transfers[{j}]"
            need(_int(t.size) and t.size > 0, f"{tw}.size", "must be > 0")
            need(t.service in services, f"{tw}.service", f"unknown service {t.service!r}")
            need(_int(t.interval) and t.interval >= 0, f"{tw}.interval", "must be >= 0")
            need(_int(t.gap) and t.gap >= 0, f"{tw}.gap", "must be >= 0")
            if t.marker is not None and _int(t.size):
                need(len(t.marker.encode()) <= t.size, f"{tw}.marker", "longer than the transfer")
    for i, a in enumerate(sc.attackers):
        w = f"attackers[{i}]"
        need(a.model in ATTACKER_MODELS, f"{w}.model", f"must be one of {', '.join(ATTACKER_MODELS)}")
        need(_int(a.count) and a.count >= 0, f"{w}.count", "must be >= 0")
        need(_int(a.rate) and a.rate >= 0, f"{w}.rate", "rate must be >= 0")
        need(_int(a.start) and a.start >= 0, f"{w}.start", "must be >= 0")
        need(a.stop is None or (_int(a.stop) and a.stop >= 0), f"{w}.stop", "must be >= 0")
        need(a.targeting in ("uniform", "captured"), f"{w}.targeting", "must be 'uniform' or 'captured'")
        need(a.channel in ("CA", "ACC"), f"{w}.channel", "must be 'CA' or 'ACC'")
        need(a.payload in FLOOD_PAYLOADS, f"{w}.payload", f"must be one of {', '.join(FLOOD_PAYLOADS)}")
    return out


def loads(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([(f"line {exc.lineno} column {exc.colno}", exc.msg)]) from None
    return from_dict(raw)


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``bundled("flood-demo")``."""
    return Path(__file__).parent / "scenarios" / f"{name}.json"
