"""The honest client's half of the protocol: building requests and packets."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import crypto
from .core import (
    ClientId,
    EndpointId,
    PacketHeader,
    PacketKind,
    Signature,
    SourceAddr,
    Stamp,
    TransferSpec,
    canonical_header_bytes,
)
from .filter import DispatchRecord, contact_request, signature_request
from .gateway import decode_plan, reply_key


@dataclass
class PlanView:
    """A delivered plan as the client sees it (stamps stay opaque)."""

    plan_id: int
    next_endpoint: EndpointId
    entries: list[tuple[PacketHeader, EndpointId, Stamp]]


def seal_datagram(master: crypto.MasterKey, header: PacketHeader, body: bytes) -> bytes:
    key = crypto.derive_key(master, crypto.packet_counter(header.plan_id, header.seq))
    clear = canonical_header_bytes(header)
    return clear + crypto.seal(key, body)


@dataclass
class ClientAgent:
    source: SourceAddr
    signature: Signature
    pki_key: bytes
    client: ClientId | None = None
    master: crypto.MasterKey | None = None
    endpoint: EndpointId | None = None
    ctrl_seq: int = 0
    plans: dict[int, PlanView] = field(default_factory=dict)

    def contact(self) -> bytes:
        return contact_request()

    def submit_signature(self) -> bytes:
        return signature_request(self.signature)

    def accept_dispatch(self, record: DispatchRecord) -> None:
        self.master = crypto.MasterKey(crypto.open_sealed(self.pki_key, record.sealed_master))
        self.client = record.client
        self.endpoint = record.next_endpoint

    def transfer_request(self, spec: TransferSpec) -> tuple[EndpointId, bytes]:
        """Control datagram asking the server to design packets for ``spec``."""
        body = spec.to_bytes()
        header = PacketHeader(0, self.ctrl_seq, len(body), self.source, self.endpoint, PacketKind.CONTROL)
        return self.endpoint, seal_datagram(self.master, header, canonical_header_bytes(header) + body)

    def accept_plan(self, sealed: bytes) -> PlanView:
        data = crypto.open_sealed(reply_key(self.master, self.ctrl_seq), sealed)
        self.ctrl_seq += 1
        plan_id, next_endpoint, entries = decode_plan(data)
        view = PlanView(plan_id, next_endpoint, entries)
        self.plans[plan_id] = view
        self.endpoint = next_endpoint
        return view

    def data_packet(self, plan: PlanView, seq: int, payload: bytes) -> tuple[EndpointId, bytes]:
        header, endpoint, stamp = plan.entries[seq]
        if len(payload) != header.payload_len:
            raise ValueError(f"seq {seq} carries {header.payload_len} bytes, got {len(payload)}")
        body = stamp.token + canonical_header_bytes(header) + payload
        return endpoint, seal_datagram(self.master, header, body)

    def fragments(self, plan: PlanView, content: bytes) -> list[tuple[EndpointId, bytes]]:
        out, off = [], 0
        for seq, (header, _, _) in enumerate(plan.entries):
            out.append(self.data_packet(plan, seq, content[off : off + header.payload_len]))
            off += header.payload_len
        return out
