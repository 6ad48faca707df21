import io
import os
import threading

import pytest
from hypothesis import given, settings, strategies as st

from dske import psk
from dske.errors import BadMagic, IdMismatch, OutOfBounds, OverlapDetected, TableExhausted, TruncatedFile
from dske.psk import PskTable, ident, provision_pair, read_pskm, table_bytes, write_pskm


def fresh(size=100, **kw):
    return PskTable("P1", "A", 1, bytes(range(256))[:size] if size <= 256 else os.urandom(size), **kw)


def test_allocation_is_contiguous_then_exhausts():
    t = fresh()
    a = t.allocate(10)
    assert (a.start, a.length, t.cursor) == (0, 10, 10)
    assert t.allocate(10).start == 10
    with pytest.raises(TableExhausted):
        fresh().allocate(101)


def test_claims():
    t = fresh()
    t.claim_range(0, 10)
    with pytest.raises(OverlapDetected):
        t.claim_range(0, 10)
    with pytest.raises(OutOfBounds):
        t.claim_range(95, 15)
    t2 = fresh()
    t2.allocate(10)
    s = t2.claim_range(10, 5)
    assert s.data == bytes(range(10, 15))
    with pytest.raises(OverlapDetected):
        t2.claim_range(12, 1)


def test_from_end_allocation_is_disjoint():
    t = fresh()
    hi = t.allocate(30, from_end=True)
    lo = t.allocate(30)
    assert (hi.start, lo.start) == (70, 0)
    assert t.used_ranges() == [(0, 30), (70, 100)]
    assert t.allocate(40).start == 30
    with pytest.raises(TableExhausted):
        t.allocate(1, from_end=True)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 40)), max_size=30))
def test_interleaved_allocations_never_overlap(ops):
    t = fresh(256)
    seen = set()
    for from_end, length in ops:
        try:
            s = t.allocate(length, from_end=from_end)
        except TableExhausted:
            assert all(hi - lo < length for lo, hi in gaps(t))
            continue
        span = set(range(s.start, s.end))
        assert not span & seen
        seen |= span
    assert t.used_bytes == len(seen)


def gaps(t):
    edges = [(0, 0)] + t.used_ranges() + [(t.size, t.size)]
    return [(edges[i][1], edges[i + 1][0]) for i in range(len(edges) - 1)]


def test_concurrent_allocations_are_disjoint():
    t = fresh(4000)
    out = []

    def worker():
        for _ in range(50):
            out.append(t.allocate(10))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    starts = sorted(s.start for s in out)
    assert starts == list(range(0, 4000, 10))


def test_journal_survives_restart(tmp_path):
    journal = tmp_path / "t.journal"
    t = fresh(journal=journal)
    t.allocate(10)
    t.claim_range(50, 5)
    t.close()
    again = fresh(journal=journal)
    assert again.used_ranges() == [(0, 10), (50, 55)]
    with pytest.raises(OverlapDetected):
        again.claim_range(52, 1)
    # a torn trailing record is ignored
    with open(journal, "ab") as fh:
        fh.write(b"\x00\x01\x02")
    assert fresh(journal=journal).used_bytes == 15


def test_journal_written_before_bytes_released(tmp_path, monkeypatch):
    journal = tmp_path / "t.journal"
    t = fresh(journal=journal)
    calls = []
    real = os.fsync
    monkeypatch.setattr(psk.os, "fsync", lambda fd: (calls.append(journal.stat().st_size), real(fd)))
    s = t.allocate(10)
    assert calls == [16] and s.length == 10


def test_pskm_round_trip(tmp_path):
    hub_copy, client_copy = provision_pair("P2", "B", 64, table_id=3, seed=9)
    path = tmp_path / "x.pskm"
    write_pskm(hub_copy, path)
    back = read_pskm(path, expected_hub_id="P2", expected_client_id="B")
    assert back.peek(0, 64) == client_copy.peek(0, 64)
    assert (back.table_id, back.used_bytes, back.hub_id) == (3, 0, ident("P2"))
    buf = io.BytesIO()
    write_pskm(client_copy, buf)
    assert buf.getvalue() == path.read_bytes()


def test_pskm_errors(tmp_path):
    table, _ = provision_pair("P1", "A", 32, seed=1)
    buf = io.BytesIO()
    write_pskm(table, buf)
    raw = buf.getvalue()
    with pytest.raises(BadMagic):
        read_pskm(b"XSKE" + raw[4:])
    with pytest.raises(BadMagic):
        read_pskm(raw[:4] + b"\x02" + raw[5:])
    with pytest.raises(TruncatedFile):
        read_pskm(raw[:-1])
    with pytest.raises(TruncatedFile):
        read_pskm(raw[:20])
    with pytest.raises(IdMismatch):
        read_pskm(raw, expected_hub_id="P9")
    with pytest.raises(IdMismatch):
        read_pskm(raw, expected_client_id="B")
    table.allocate(1)
    with pytest.raises(ValueError):
        write_pskm(table, tmp_path / "used.pskm")


def test_provisioning_determinism():
    a = table_bytes(64, hub_id="P1", client_id="A", seed=5)
    assert a == table_bytes(64, hub_id="P1", client_id="A", seed=5)
    assert a != table_bytes(64, hub_id="P1", client_id="B", seed=5)
    assert a != table_bytes(64, hub_id="P1", client_id="A", seed=6)
    assert table_bytes(64, hub_id="P1", client_id="A") != table_bytes(64, hub_id="P1", client_id="A")
    with pytest.raises(ValueError):
        table_bytes(0, hub_id="P1", client_id="A")


def test_identifiers():
    assert ident("A") == b"A" + bytes(15)
    with pytest.raises(ValueError):
        ident("x" * 17)
