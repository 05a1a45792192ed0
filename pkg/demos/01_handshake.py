"""One honest client from first contact to a delivered file, driven by hand.

Run: python demos/01_handshake.py
"""

import numpy as np

from hacss.client import ClientAgent
from hacss.core import ServiceCategory, Signature, TransferSpec, digest
from hacss.server import CA, Server
from hacss.tickets import ServicePolicy, SivRegistry

rng = np.random.default_rng(0)

sig = Signature.make(1, 1000)
pki = rng.bytes(32)
registry = SivRegistry()
registry.register(sig, pki)
server = Server(
    endpoints=4,
    registry=registry,
    policy=ServicePolicy({1: frozenset(ServiceCategory)}, lifetime=10_000),
    capacity=100,
    stamp_key=rng.bytes(32),
    keygen=lambda: rng.bytes(32),
)
alice = ClientAgent(0x0A000001, sig, pki)

# CA channel: contact, wait out the block window, then present the signature.
verdict, replies = server.handle(CA, alice.source, alice.contact(), 0)
retry = max(1, replies[0].body)
print(f"contact        -> {verdict.outcome}, cost {verdict.cost}, sign at tick {retry}")
verdict, replies = server.handle(CA, alice.source, alice.submit_signature(), retry)
print(f"signature      -> {verdict.outcome}, cost {verdict.cost}")
alice.accept_dispatch(replies[0].body)

# ACC channel: ask for a packet plan, then send each fragment where the plan says.
content = rng.bytes(2500)
spec = TransferSpec(alice.client, len(content), "report.bin", digest(content))
endpoint, datagram = alice.transfer_request(spec)
verdict, replies = server.handle(endpoint, 0, datagram, retry + 1)
print(f"plan request   -> {verdict.outcome} at endpoint {endpoint}, cost {verdict.cost}")
plan = alice.accept_plan(replies[0].body.sealed)

for seq, (ep, dg) in enumerate(alice.fragments(plan, content)):
    verdict, _ = server.handle(ep, 0, dg, retry + 2)
    print(f"fragment {seq}     -> {verdict.outcome} at endpoint {ep}, cost {verdict.cost}")
    # The same bytes again are refused.
    replay, _ = server.handle(ep, 0, dg, retry + 2)
    print(f"  replay       -> {replay.outcome}, cost {replay.cost}")

[done] = server.assembly.delivered
print(f"delivered {done.digest == digest(content) and 'intact' or 'CORRUPT'}, next endpoint {plan.next_endpoint}")
