"""Stamp issuing and verification.

A stamp binds the digest of a server-designed header to the tick it was issued
and a strictly increasing serial. It is sealed under a key that never leaves
the server, so clients carry it but cannot read or forge it.

Stamp plaintext: ``digest[32] issued_at[8] serial[8]`` (48 bytes).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from . import crypto
from .core import PacketHeader, Stamp, header_digest

STAMP_PLAINTEXT_SIZE = 48
STAMP_TOKEN_SIZE = STAMP_PLAINTEXT_SIZE + crypto.SEAL_OVERHEAD
DEFAULT_MAX_AGE = 500


class VerifyOutcome(enum.Enum):
    OK = "Ok"
    STALE = "Stale"
    MISMATCH = "Mismatch"
    GARBLED = "Garbled"


@dataclass(frozen=True)
class FreshnessWindow:
    max_age: int = DEFAULT_MAX_AGE

    def __post_init__(self):
        if self.max_age <= 0:
            raise ValueError("max_age must be positive")


@dataclass(frozen=True)
class StampContents:
    header_digest: bytes
    issued_at: int
    serial: int


class StampEngine:
    def __init__(self, stamp_key: bytes, window: FreshnessWindow | None = None):
        if len(stamp_key) != crypto.KEY_SIZE:
            raise ValueError("stamp key must be 32 bytes")
        self._key = crypto.subkey(stamp_key, b"hacss/stamp")
        self.window = window or FreshnessWindow()
        self._serial = 0
        self.issued = 0
        self.verified = 0

    def issue_stamp(self, h: PacketHeader, now: int) -> Stamp:
        self._serial += 1
        self.issued += 1
        plaintext = header_digest(h) + struct.pack(">QQ", now, self._serial)
        return Stamp(crypto.seal(self._key, plaintext))

    def read(self, s: Stamp) -> StampContents:
        """Open a stamp (server side only). Raises ``TamperError``."""
        plaintext = crypto.open_sealed(self._key, s.token)
        if len(plaintext) != STAMP_PLAINTEXT_SIZE:
            raise crypto.TamperError("stamp plaintext has wrong length")
        issued_at, serial = struct.unpack_from(">QQ", plaintext, 32)
        return StampContents(plaintext[:32], issued_at, serial)

    def verify_stamp(
        self,
        s: Stamp,
        h: PacketHeader,
        now: int,
        w: FreshnessWindow | None = None,
    ) -> VerifyOutcome:
        self.verified += 1
        return self.check(s, h, now, w)

    def check(self, s: Stamp, h: PacketHeader, now: int, w: FreshnessWindow | None = None) -> VerifyOutcome:
        """``verify_stamp`` without touching the verification counter."""
        w = w or self.window
        try:
            contents = self.read(s)
        except crypto.TamperError:
            return VerifyOutcome.GARBLED
        # Future-dated stamps count as stale as well.
        if contents.issued_at > now or now - contents.issued_at > w.max_age:
            return VerifyOutcome.STALE
        if contents.header_digest != header_digest(h):
            return VerifyOutcome.MISMATCH
        return VerifyOutcome.OK
