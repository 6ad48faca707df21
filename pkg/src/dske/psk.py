"""Pre-shared random tables with single-use accounting.

Each hub/client pair holds two copies of one random table.  Every byte may
be read once: ``allocate`` hands out the next unused run, ``claim_range``
honours a range chosen by the peer.  Both mark the bytes used before they
are returned, including when the caller later fails to validate the
message they key.

Clients allocate upward from the start of a table and hubs allocate
downward from its end, so the two parties never pick the same bytes
without coordinating.

PSKM file layout (all integers big-endian)::

    b"DSKE" | version u8 = 1 | hub_id 16B | client_id 16B
    | table_id u64 | length u64 | raw bytes

The optional journal sidecar is a sequence of ``(start u64, length u64)``
records, appended and flushed before the bytes they cover are released.
"""

from __future__ import annotations

import bisect
import hashlib
import os
import secrets
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

from .errors import BadMagic, IdMismatch, OutOfBounds, OverlapDetected, TableExhausted, TruncatedFile

MAGIC = b"DSKE"
VERSION = 1
ID_BYTES = 16
_HEADER = struct.Struct(">4sB16s16sQQ")
_RECORD = struct.Struct(">QQ")


def ident(name: str | bytes) -> bytes:
    """Pack a short name into a 16-byte opaque identifier."""
    raw = name.encode() if isinstance(name, str) else bytes(name)
    if len(raw) > ID_BYTES:
        raise ValueError(f"identifier longer than {ID_BYTES} bytes: {raw!r}")
    return raw.ljust(ID_BYTES, b"\0")


def ident_name(raw: bytes) -> str:
    return raw.rstrip(b"\0").decode(errors="replace")


@dataclass(frozen=True)
class KeySlice:
    table_id: int
    start: int
    length: int
    data: bytes

    @property
    def end(self) -> int:
        return self.start + self.length


class PskTable:
    def __init__(
        self,
        hub_id: bytes,
        client_id: bytes,
        table_id: int,
        data: bytes,
        journal: str | os.PathLike | None = None,
    ):
        self.hub_id = ident(hub_id)
        self.client_id = ident(client_id)
        self.table_id = table_id
        self._data = bytes(data)
        self._used: list[tuple[int, int]] = []  # sorted disjoint [start, end)
        self._lock = threading.Lock()
        self._journal = None
        if journal is not None:
            self._replay(Path(journal))
            self._journal = open(journal, "ab")

    def __repr__(self) -> str:
        return (
            f"PskTable(hub={ident_name(self.hub_id)!r}, client={ident_name(self.client_id)!r}, "
            f"id={self.table_id}, used={self.used_bytes}/{self.size})"
        )

    @property
    def size(self) -> int:
        return len(self._data)

    @property
    def used_bytes(self) -> int:
        with self._lock:
            return sum(e - s for s, e in self._used)

    @property
    def unused_bytes(self) -> int:
        return self.size - self.used_bytes

    @property
    def cursor(self) -> int:
        """End of the lowest used run starting at 0 (the next ascending start)."""
        with self._lock:
            if self._used and self._used[0][0] == 0:
                return self._used[0][1]
            return 0

    def used_ranges(self) -> list[tuple[int, int]]:
        with self._lock:
            return list(self._used)

    def peek(self, start: int, length: int) -> bytes:
        """Read bytes without consuming them; for dealers, tests and audits."""
        return self._data[start : start + length]

    def is_unused(self, start: int, length: int) -> bool:
        with self._lock:
            return self._free(start, start + length)

    # -- consumption ----------------------------------------------------

    def allocate(self, length: int, *, from_end: bool = False) -> KeySlice:
        if length <= 0:
            raise ValueError("allocation length must be positive")
        with self._lock:
            start = self._find_gap(length, from_end)
            if start is None:
                raise TableExhausted(
                    f"table {self.table_id}: no {length}-byte run left in {self.size} bytes"
                )
            return self._take(start, length)

    def claim_range(self, start: int, length: int) -> KeySlice:
        if start < 0 or length <= 0 or start + length > self.size:
            raise OutOfBounds(f"range [{start}, {start + length}) outside table of {self.size}")
        with self._lock:
            if not self._free(start, start + length):
                raise OverlapDetected(f"range [{start}, {start + length}) was already used")
            return self._take(start, length)

    # -- internals (caller holds the lock) ------------------------------

    def _free(self, start: int, end: int) -> bool:
        i = bisect.bisect_right(self._used, (start, float("inf")))
        if i and self._used[i - 1][1] > start:
            return False
        return not (i < len(self._used) and self._used[i][0] < end)

    def _find_gap(self, length: int, from_end: bool) -> int | None:
        bounds = [(0, 0)] + self._used + [(self.size, self.size)]
        gaps = [(bounds[i][1], bounds[i + 1][0]) for i in range(len(bounds) - 1)]
        if from_end:
            for lo, hi in reversed(gaps):
                if hi - lo >= length:
                    return hi - length
        else:
            for lo, hi in gaps:
                if hi - lo >= length:
                    return lo
        return None

    def _take(self, start: int, length: int) -> KeySlice:
        end = start + length
        if self._journal is not None:
            self._journal.write(_RECORD.pack(start, length))
            self._journal.flush()
            os.fsync(self._journal.fileno())
        self._mark(start, end)
        return KeySlice(self.table_id, start, length, self._data[start:end])

    def _mark(self, start: int, end: int) -> None:
        i = bisect.bisect_left(self._used, (start, end))
        self._used.insert(i, (start, end))
        merged: list[tuple[int, int]] = []
        for s, e in self._used:
            if merged and merged[-1][1] >= s:
                merged[-1] = (merged[-1][0], max(merged[-1][1], e))
            else:
                merged.append((s, e))
        self._used = merged

    def _replay(self, path: Path) -> None:
        if not path.exists():
            return
        raw = path.read_bytes()
        # a torn trailing record never released its bytes, so it is skipped
        usable = len(raw) - len(raw) % _RECORD.size
        for start, length in _RECORD.iter_unpack(raw[:usable]):
            if start + length > self.size:
                raise OutOfBounds("journal references bytes outside the table")
            self._mark(start, start + length)

    def close(self) -> None:
        if self._journal is not None:
            self._journal.close()
            self._journal = None


def table_bytes(
    size: int,
    *,
    hub_id: bytes | str,
    client_id: bytes | str,
    table_id: int = 1,
    seed: int | bytes | None = None,
) -> bytes:
    """Random material for one table: OS entropy, or SHAKE-256 of a seed in test mode."""
    if size <= 0:
        raise ValueError("table size must be positive")
    if seed is None:
        return secrets.token_bytes(size)
    if isinstance(seed, int):
        seed = seed.to_bytes(16, "big", signed=True)
    xof = hashlib.shake_256(b"dske-table|" + seed + ident(hub_id) + ident(client_id) + table_id.to_bytes(8, "big"))
    return xof.digest(size)


def provision_pair(
    hub_id: bytes | str, client_id: bytes | str, size: int, *, table_id: int = 1, seed: int | bytes | None = None
) -> tuple[PskTable, PskTable]:
    """The hub's copy and the client's copy of one fresh table."""
    data = table_bytes(size, hub_id=hub_id, client_id=client_id, table_id=table_id, seed=seed)
    return PskTable(hub_id, client_id, table_id, data), PskTable(hub_id, client_id, table_id, data)


def write_pskm(table: PskTable, destination: str | os.PathLike | BinaryIO) -> None:
    if table.used_bytes:
        raise ValueError("only a fully unused table may be written to a PSKM")
    header = _HEADER.pack(MAGIC, VERSION, table.hub_id, table.client_id, table.table_id, table.size)
    if hasattr(destination, "write"):
        destination.write(header + table._data)
    else:
        Path(destination).write_bytes(header + table._data)


def read_pskm(
    source: str | os.PathLike | BinaryIO | bytes,
    *,
    expected_hub_id: bytes | str | None = None,
    expected_client_id: bytes | str | None = None,
    journal: str | os.PathLike | None = None,
) -> PskTable:
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise BadMagic("not a PSKM file")
    if len(raw) < _HEADER.size:
        raise TruncatedFile("PSKM header is incomplete")
    magic, version, hub_id, client_id, table_id, length = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise BadMagic(f"unsupported PSKM version {version}")
    body = raw[_HEADER.size :]
    if len(body) != length:
        raise TruncatedFile(f"header announces {length} bytes, file holds {len(body)}")
    if expected_hub_id is not None and ident(expected_hub_id) != hub_id:
        raise IdMismatch(f"PSKM belongs to hub {ident_name(hub_id)!r}")
    if expected_client_id is not None and ident(expected_client_id) != client_id:
        raise IdMismatch(f"PSKM belongs to client {ident_name(client_id)!r}")
    return PskTable(hub_id, client_id, table_id, body, journal=journal)
