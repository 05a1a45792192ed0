import pytest

from hacss.core import PacketHeader, PacketKind, Stamp
from hacss.stamps import STAMP_TOKEN_SIZE, FreshnessWindow, StampEngine, VerifyOutcome

H = PacketHeader(5, 0, 1000, 0x0A000001, 2, PacketKind.DATA)


@pytest.fixture
def engine():
    return StampEngine(b"k" * 32, FreshnessWindow(50))


def test_token_size(engine):
    assert len(engine.issue_stamp(H, 0).token) == STAMP_TOKEN_SIZE == 76


def test_identical_headers_get_different_stamps(engine):
    a, b = engine.issue_stamp(H, 3), engine.issue_stamp(H, 3)
    assert a != b
    assert engine.read(b).serial == engine.read(a).serial + 1


def test_issued_at_round_trip(engine):
    assert engine.read(engine.issue_stamp(H, 100)).issued_at == 100


def test_serials_unique(engine):
    serials = [engine.read(engine.issue_stamp(H, i)).serial for i in range(10_000)]
    assert len(set(serials)) == 10_000
    assert serials == sorted(serials)


def test_verify_ok_and_counter(engine):
    s = engine.issue_stamp(H, 10)
    assert engine.verify_stamp(s, H, 10) is VerifyOutcome.OK
    assert engine.check(s, H, 10) is VerifyOutcome.OK
    assert engine.verified == 1


def test_stale_boundary(engine):
    s = engine.issue_stamp(H, 10)
    assert engine.verify_stamp(s, H, 60) is VerifyOutcome.OK
    assert engine.verify_stamp(s, H, 61) is VerifyOutcome.STALE
    assert engine.verify_stamp(s, H, 9) is VerifyOutcome.STALE  # future-dated


@pytest.mark.parametrize("field", PacketHeader._fields)
def test_any_header_field_change_is_mismatch(engine, field):
    s = engine.issue_stamp(H, 0)
    value = getattr(H, field)
    changed = H._replace(**{field: PacketKind.CONTROL if field == "kind" else value + 1})
    assert engine.verify_stamp(s, changed, 0) is VerifyOutcome.MISMATCH


def test_garbled_beats_stale(engine):
    s = engine.issue_stamp(H, 0)
    bad = bytearray(s.token)
    bad[40] ^= 0xFF
    assert engine.verify_stamp(Stamp(bytes(bad)), H, 10_000) is VerifyOutcome.GARBLED


def test_stale_beats_mismatch(engine):
    s = engine.issue_stamp(H, 0)
    assert engine.verify_stamp(s, H._replace(seq=9), 500) is VerifyOutcome.STALE


def test_other_engine_cannot_read(engine):
    s = engine.issue_stamp(H, 0)
    assert StampEngine(b"j" * 32).check(s, H, 0) is VerifyOutcome.GARBLED


def test_window_validation():
    with pytest.raises(ValueError):
        FreshnessWindow(0)
    with pytest.raises(ValueError):
        StampEngine(b"short")
