import pytest

from hacss.assembly import AssemblyChecker, Buffered, Clean, Completed, OverflowFragment, ScanRule, Threat, scan
from hacss.core import PacketHeader, PlanEntry, Stamp, TransferPlan, TransferSpec, digest


def plan(sizes, plan_id=1):
    content = b"".join(bytes([65 + i]) * n for i, n in enumerate(sizes))
    entries = [PlanEntry(PacketHeader(plan_id, i, n, 1, 0), Stamp(b""), 0) for i, n in enumerate(sizes)]
    return TransferPlan(plan_id, TransferSpec(1, len(content), "f", digest(content)), entries, 0), content


def test_out_of_order_completes_in_seq_order():
    p, content = plan([3, 3, 2])
    a = AssemblyChecker()
    a.register(p)
    assert isinstance(a.ingest(1, 1, b"BBB"), Buffered)
    assert isinstance(a.ingest(1, 0, b"AAA"), Buffered)
    done = a.ingest(1, 2, b"CC")
    assert done == Completed(content)
    assert digest(done.data) == p.spec.content_digest


def test_length_gate():
    p, _ = plan([3])
    a = AssemblyChecker()
    a.register(p)
    with pytest.raises(OverflowFragment):
        a.ingest(1, 0, b"AAAA")
    assert a.check_fragment(1, 0, b"AAA") is True


def test_scan_rules():
    assert scan(b"anything", ()) == Clean()
    rules = (ScanRule("x", b"BAD"), ScanRule("y", predicate=lambda d: len(d) > 10))
    assert scan(b"..BAD..", rules) == Threat("x")
    assert scan(b"0123456789AB", rules) == Threat("y")


def test_marker_split_across_fragments_only_caught_whole():
    rules = [ScanRule("eicar", b"EICAR")]
    p, _ = plan([4, 4])
    a = AssemblyChecker(rules)
    a.register(p)
    parts = [b"xxEI", b"CARy"]
    assert all(isinstance(a.scan(f), Clean) for f in parts)
    a.ingest(1, 0, parts[0])
    done = a.ingest(1, 1, parts[1])
    assert a.scan(done.data) == Threat("eicar")


def test_single_delivery():
    p, content = plan([2])
    a = AssemblyChecker()
    a.deliver(p, content, 3)
    with pytest.raises(RuntimeError):
        a.deliver(p, content, 4)
    assert len(a.delivered) == 1 and a.delivered[0].tick == 3
