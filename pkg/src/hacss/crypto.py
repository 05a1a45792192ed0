"""Per-packet dynamic keys and authenticated sealing.

A client holds one master key; every packet is sealed under a key derived from
that master and the packet's (seq, plan_id) pair, so no two packets share a key.

Sealed layout: ``nonce[12] || ciphertext || tag[16]`` (AES-256-GCM). The nonce
is synthetic (an HMAC of the plaintext under the key), which keeps sealing
deterministic for a seeded run without ever repeating a nonce for two distinct
plaintexts under one key.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

KEY_SIZE = 32
NONCE_SIZE = 12
TAG_SIZE = 16
SEAL_OVERHEAD = NONCE_SIZE + TAG_SIZE


class TamperError(Exception):
    """A sealed blob failed its integrity check.

    Raised both for modified bytes and for opening under the wrong key; the two
    cases are deliberately indistinguishable.
    """


# Kept as a name so callers can express intent; it is the same failure.
WrongKeyError = TamperError


@dataclass(frozen=True)
class MasterKey:
    secret: bytes

    def __post_init__(self):
        if len(self.secret) != KEY_SIZE:
            raise ValueError(f"master key must be {KEY_SIZE} bytes")


@dataclass(frozen=True)
class DynamicKey:
    secret: bytes
    counter: int


def packet_counter(plan_id: int, seq: int) -> int:
    """Counter whose 16-byte big-endian form is ``seq[8] || plan_id[8]``."""
    return (seq << 64) | plan_id


def derive_key(master: MasterKey, counter: int) -> DynamicKey:
    secret = hmac.new(master.secret, counter.to_bytes(16, "big"), hashlib.sha256).digest()
    return DynamicKey(secret, counter)


def subkey(secret: bytes, label: bytes) -> bytes:
    """Domain-separated 256-bit key from a long-term secret."""
    return hmac.new(secret, label, hashlib.sha256).digest()


def _secret(key: DynamicKey | bytes) -> bytes:
    return key if isinstance(key, bytes) else key.secret


def seal(key: DynamicKey | bytes, plaintext: bytes) -> bytes:
    if not plaintext:
        raise ValueError("refusing to seal an empty plaintext")
    secret = _secret(key)
    nonce = hmac.new(secret, plaintext, hashlib.sha256).digest()[:NONCE_SIZE]
    return nonce + AESGCM(secret).encrypt(nonce, plaintext, None)


def open_sealed(key: DynamicKey | bytes, sealed: bytes) -> bytes:
    if len(sealed) <= SEAL_OVERHEAD:
        raise TamperError("sealed blob too short")
    nonce, body = sealed[:NONCE_SIZE], sealed[NONCE_SIZE:]
    try:
        return AESGCM(_secret(key)).decrypt(nonce, body, None)
    except InvalidTag:
        raise TamperError("integrity check failed") from None


# ``open`` is the natural verb but shadows the builtin inside this module.
open = open_sealed  # noqa: A001
