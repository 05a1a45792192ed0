import numpy as np
import pytest

from hacss import crypto


def test_derive_key_deterministic(master):
    assert crypto.derive_key(master, 7) == crypto.derive_key(master, 7)


def test_derive_key_no_collisions_over_counters(master):
    keys = {crypto.derive_key(master, i).secret for i in range(10_001)}
    assert len(keys) == 10_001


def test_derive_key_differs_across_masters(rng):
    for _ in range(1000):
        a, b = crypto.MasterKey(rng.bytes(32)), crypto.MasterKey(rng.bytes(32))
        assert crypto.derive_key(a, 0) != crypto.derive_key(b, 0)


def test_counter_layout():
    c = crypto.packet_counter(plan_id=1, seq=2)
    assert c.to_bytes(16, "big") == (2).to_bytes(8, "big") + (1).to_bytes(8, "big")


def test_round_trip_random(master, rng):
    key = crypto.derive_key(master, 1)
    for i in range(1000):
        p = rng.bytes(int(rng.integers(1, 300)))
        sealed = crypto.seal(key, p)
        assert len(sealed) == len(p) + crypto.SEAL_OVERHEAD
        assert crypto.open(key, sealed) == p


def test_every_byte_flip_is_tamper(master):
    key = crypto.derive_key(master, 3)
    sealed = crypto.seal(key, b"the quick brown fox" * 3)
    for i in range(len(sealed)):
        bad = bytearray(sealed)
        bad[i] ^= 0x01
        with pytest.raises(crypto.TamperError):
            crypto.open_sealed(key, bytes(bad))


def test_wrong_key_is_same_error(master):
    sealed = crypto.seal(crypto.derive_key(master, 10), b"payload")
    with pytest.raises(crypto.WrongKeyError):
        crypto.open_sealed(crypto.derive_key(master, 11), sealed)
    assert crypto.WrongKeyError is crypto.TamperError


def test_seal_is_deterministic_and_rejects_empty(master):
    key = crypto.derive_key(master, 0)
    assert crypto.seal(key, b"abc") == crypto.seal(key, b"abc")
    with pytest.raises(ValueError):
        crypto.seal(key, b"")
    with pytest.raises(crypto.TamperError):
        crypto.open_sealed(key, b"\x00" * crypto.SEAL_OVERHEAD)


def test_master_key_size():
    with pytest.raises(ValueError):
        crypto.MasterKey(b"short")


def test_subkey_separates_labels():
    s = np.random.default_rng(1).bytes(32)
    assert crypto.subkey(s, b"a") != crypto.subkey(s, b"b")
