"""Shared domain vocabulary and canonical byte layouts.

Every sealed or digested structure in the package goes through the fixed-width
big-endian layouts defined here, so digests are stable across runs.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

# Plain integer aliases. Python ints already carry a total order, which is all
# the rate limiter needs from a source address.
SourceAddr = int
EndpointId = int
ClientId = int

HEADER_FORMAT = ">QIIIHB"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)  # 23
SIGNATURE_FORMAT = ">HQ"
SIGNATURE_WIRE_SIZE = 12  # issuer[2] serial[8] checksum[2]
DIGEST_SIZE = 32

U16 = 0xFFFF
U32 = 0xFFFF_FFFF
U64 = 0xFFFF_FFFF_FFFF_FFFF


class ServiceCategory(enum.Enum):
    MESSAGE = "MESSAGE"
    FILE_UPLOAD = "FILE_UPLOAD"
    QUERY = "QUERY"


class PacketKind(enum.IntEnum):
    DATA = 0
    CONTROL = 1


class HeaderFormatError(ValueError):
    """Raised when bytes do not parse as a canonical header."""


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def ones_complement_sum16(data: bytes) -> int:
    """16-bit one's-complement sum of big-endian words (odd tail zero-padded)."""
    if len(data) % 2:
        data += b"\x00"
    total = 0
    for (word,) in struct.iter_unpack(">H", data):
        total += word
        total = (total & U16) + (total >> 16)
    return total


def signature_checksum(issuer: int, serial: int) -> int:
    """Format checksum of a signature: complement of the one's-complement sum.

    This is the Internet-checksum construction over ``issuer[2] serial[8]``.
    The all-zero input maps to ``0xFFFF``.
    """
    return ~ones_complement_sum16(struct.pack(SIGNATURE_FORMAT, issuer, serial)) & U16


@dataclass(frozen=True)
class Signature:
    issuer: int
    serial: int
    checksum: int

    @classmethod
    def make(cls, issuer: int, serial: int) -> Signature:
        """Build a well-formed signature."""
        return cls(issuer, serial, signature_checksum(issuer, serial))

    @property
    def well_formed(self) -> bool:
        return self.checksum == signature_checksum(self.issuer, self.serial)

    def to_bytes(self) -> bytes:
        return struct.pack(">HQH", self.issuer, self.serial, self.checksum)

    @classmethod
    def from_bytes(cls, data: bytes) -> Signature:
        issuer, serial, checksum = struct.unpack(">HQH", data[:SIGNATURE_WIRE_SIZE])
        return cls(issuer, serial, checksum)


@dataclass(frozen=True)
class Ticket:
    client: ClientId
    services: frozenset[ServiceCategory]
    issued_at: int
    expires_at: int

    def __post_init__(self):
        if not self.services:
            raise ValueError("ticket must grant at least one service")
        if self.issued_at >= self.expires_at:
            raise ValueError("ticket must expire after it is issued")

    def live(self, now: int) -> bool:
        return self.issued_at <= now < self.expires_at

    def permits(self, service: ServiceCategory, now: int) -> bool:
        return self.live(now) and service in self.services


class PacketHeader(NamedTuple):
    plan_id: int
    seq: int
    payload_len: int
    source: SourceAddr
    dest: EndpointId
    kind: PacketKind = PacketKind.DATA


def canonical_header_bytes(h: PacketHeader) -> bytes:
    """plan_id[8] seq[4] payload_len[4] source[4] dest[2] kind[1], big-endian."""
    return struct.pack(HEADER_FORMAT, h.plan_id, h.seq, h.payload_len, h.source, h.dest, int(h.kind))


def parse_header(data: bytes) -> PacketHeader:
    if len(data) < HEADER_SIZE:
        raise HeaderFormatError(f"need {HEADER_SIZE} bytes, got {len(data)}")
    plan_id, seq, payload_len, source, dest, kind = struct.unpack_from(HEADER_FORMAT, data)
    try:
        kind = PacketKind(kind)
    except ValueError:
        raise HeaderFormatError(f"unknown packet kind {kind}") from None
    return PacketHeader(plan_id, seq, payload_len, source, dest, kind)


def header_digest(h: PacketHeader) -> bytes:
    return digest(canonical_header_bytes(h))


@dataclass(frozen=True)
class Packet:
    """A datagram: clear header followed by a body sealed under the per-packet key."""

    clear_header: PacketHeader
    sealed_body: bytes

    def to_bytes(self) -> bytes:
        return canonical_header_bytes(self.clear_header) + self.sealed_body

    @classmethod
    def from_bytes(cls, data: bytes) -> Packet:
        return cls(parse_header(data), bytes(data[HEADER_SIZE:]))


@dataclass(frozen=True)
class Stamp:
    """Opaque sealed token; only the stamp engine can read it."""

    token: bytes


@dataclass(frozen=True)
class TransferSpec:
    client: ClientId
    total_size: int
    name: str
    content_digest: bytes
    service: ServiceCategory = ServiceCategory.FILE_UPLOAD

    def __post_init__(self):
        if self.total_size < 0:
            raise ValueError("total_size must be non-negative")

    def to_bytes(self) -> bytes:
        name = self.name.encode()
        service = list(ServiceCategory).index(self.service)
        return (
            struct.pack(">QQB", self.client, self.total_size, service)
            + self.content_digest
            + struct.pack(">H", len(name))
            + name
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> TransferSpec:
        client, total_size, service = struct.unpack_from(">QQB", data)
        off = 17
        content_digest = bytes(data[off : off + DIGEST_SIZE])
        off += DIGEST_SIZE
        (name_len,) = struct.unpack_from(">H", data, off)
        name = bytes(data[off + 2 : off + 2 + name_len]).decode()
        return cls(client, total_size, name, content_digest, list(ServiceCategory)[service])


class PlanEntry(NamedTuple):
    header: PacketHeader
    stamp: Stamp
    endpoint: EndpointId


@dataclass
class TransferPlan:
    plan_id: int
    spec: TransferSpec
    entries: list[PlanEntry]
    next_endpoint: EndpointId
    received: bytearray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.received is None:
            self.received = bytearray((len(self.entries) + 7) // 8)

    def __len__(self) -> int:
        return len(self.entries)

    def has(self, seq: int) -> bool:
        return bool(self.received[seq >> 3] & (1 << (seq & 7)))

    def mark(self, seq: int) -> None:
        self.received[seq >> 3] |= 1 << (seq & 7)

    @property
    def received_count(self) -> int:
        return sum(bin(b).count("1") for b in self.received)

    @property
    def complete(self) -> bool:
        return self.received_count == len(self.entries)
