"""Binary encoding of protocol messages.

Every frame is::

    length u32 | type u8 | fields ... | message_tag (8 bytes)

where ``length`` counts everything after itself.  Integers are big-endian,
identifiers are 16 bytes, key identifiers are 24 bytes (a 16-byte nonce
followed by a u64 running index).  The message tag is computed over
``type | fields`` (:func:`signed_bytes`), i.e. over every byte of the
frame except the length prefix and the tag itself.

Decoding is strict: unknown flag bits, inconsistent lengths and trailing
bytes are rejected, so ``encode(decode(frame)) == frame`` for every frame
that decodes at all.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields, replace
from typing import ClassVar, Union

from .errors import FieldOverflow, Truncated, UnknownMessageType
from .psk import ID_BYTES
from .tags import TAG_BYTES

KEY_ID_BYTES = 24
MAX_FRAME = 1 << 31

_FLAG_ENCRYPTED = 0x01
_FLAG_KEY_TAG = 0x02


def make_key_id(nonce: bytes, index: int) -> bytes:
    if len(nonce) != 16:
        raise FieldOverflow("key id nonce must be 16 bytes")
    return bytes(nonce) + index.to_bytes(8, "big")


@dataclass(frozen=True)
class SliceRef:
    table_id: int
    start: int
    length: int


@dataclass(frozen=True)
class KeyRequest:
    """A -> hub: one share of a key agreement."""

    TYPE: ClassVar[int] = 0x01
    sender_id: bytes
    receiver_id: bytes
    key_id: bytes
    n: int
    k: int
    x_coord: int
    share_ref: SliceRef
    encrypted_share: bytes | None
    key_tag: bytes | None
    tag_ref: SliceRef
    message_tag: bytes = bytes(TAG_BYTES)


@dataclass(frozen=True)
class KeyInstruction:
    """hub -> B: the share re-encrypted under B's table."""

    TYPE: ClassVar[int] = 0x02
    hub_id: bytes
    sender_id: bytes
    key_id: bytes
    n: int
    k: int
    x_coord: int
    share_ref: SliceRef
    encrypted_share: bytes
    key_tag: bytes | None
    tag_ref: SliceRef
    message_tag: bytes = bytes(TAG_BYTES)


@dataclass(frozen=True)
class IdentityQuery:
    TYPE: ClassVar[int] = 0x03
    querier_id: bytes
    subject_id: bytes


@dataclass(frozen=True)
class IdentityResponse:
    TYPE: ClassVar[int] = 0x04
    hub_id: bytes
    querier_id: bytes
    subject_id: bytes
    record: bytes
    tag_ref: SliceRef
    message_tag: bytes = bytes(TAG_BYTES)


@dataclass(frozen=True)
class Negotiation:
    """B -> A in the adapted protocol: a tag per share B validated."""

    TYPE: ClassVar[int] = 0x05
    key_id: bytes
    share_tags: tuple[tuple[int, bytes], ...]
    message_tag: bytes = bytes(TAG_BYTES)


@dataclass(frozen=True)
class Finalize:
    """A -> B in the adapted protocol: the accepted hub list and key tag."""

    TYPE: ClassVar[int] = 0x06
    key_id: bytes
    accepted: tuple[int, ...]
    key_tag: bytes
    message_tag: bytes = bytes(TAG_BYTES)


Message = Union[KeyRequest, KeyInstruction, IdentityQuery, IdentityResponse, Negotiation, Finalize]
_TYPES = {cls.TYPE: cls for cls in (KeyRequest, KeyInstruction, IdentityQuery, IdentityResponse, Negotiation, Finalize)}


def with_tag(msg: Message, tag: bytes) -> Message:
    return replace(msg, message_tag=tag)


def is_tagged(msg: Message) -> bool:
    return any(f.name == "message_tag" for f in fields(msg))


# -- encoding ---------------------------------------------------------------


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def uint(self, value: int, width: int) -> None:
        if not 0 <= value < 1 << (8 * width):
            raise FieldOverflow(f"{value} does not fit in {width} bytes")
        self.parts.append(value.to_bytes(width, "big"))

    def fixed(self, raw: bytes, width: int) -> None:
        if len(raw) != width:
            raise FieldOverflow(f"expected {width} bytes, got {len(raw)}")
        self.parts.append(bytes(raw))

    def blob(self, raw: bytes, prefix: int) -> None:
        self.uint(len(raw), prefix)
        self.parts.append(bytes(raw))

    def ref(self, ref: SliceRef) -> None:
        for v in (ref.table_id, ref.start, ref.length):
            self.uint(v, 8)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


def _write_fields(w: _Writer, msg: Message) -> None:
    w.uint(msg.TYPE, 1)
    if isinstance(msg, KeyRequest):
        w.fixed(msg.sender_id, ID_BYTES)
        w.fixed(msg.receiver_id, ID_BYTES)
        w.fixed(msg.key_id, KEY_ID_BYTES)
        w.uint(msg.n, 2)
        w.uint(msg.k, 2)
        w.uint(msg.x_coord, 1)
        w.ref(msg.share_ref)
        flags = (_FLAG_ENCRYPTED if msg.encrypted_share is not None else 0) | (
            _FLAG_KEY_TAG if msg.key_tag is not None else 0
        )
        w.uint(flags, 1)
        if msg.encrypted_share is not None:
            if len(msg.encrypted_share) != msg.share_ref.length:
                raise FieldOverflow("encrypted share length differs from its slice")
            w.blob(msg.encrypted_share, 4)
        if msg.key_tag is not None:
            w.fixed(msg.key_tag, TAG_BYTES)
        w.ref(msg.tag_ref)
    elif isinstance(msg, KeyInstruction):
        w.fixed(msg.hub_id, ID_BYTES)
        w.fixed(msg.sender_id, ID_BYTES)
        w.fixed(msg.key_id, KEY_ID_BYTES)
        w.uint(msg.n, 2)
        w.uint(msg.k, 2)
        w.uint(msg.x_coord, 1)
        w.ref(msg.share_ref)
        w.uint(_FLAG_KEY_TAG if msg.key_tag is not None else 0, 1)
        if len(msg.encrypted_share) != msg.share_ref.length:
            raise FieldOverflow("encrypted share length differs from its slice")
        w.blob(msg.encrypted_share, 4)
        if msg.key_tag is not None:
            w.fixed(msg.key_tag, TAG_BYTES)
        w.ref(msg.tag_ref)
    elif isinstance(msg, IdentityQuery):
        w.fixed(msg.querier_id, ID_BYTES)
        w.fixed(msg.subject_id, ID_BYTES)
    elif isinstance(msg, IdentityResponse):
        w.fixed(msg.hub_id, ID_BYTES)
        w.fixed(msg.querier_id, ID_BYTES)
        w.fixed(msg.subject_id, ID_BYTES)
        w.blob(msg.record, 2)
        w.ref(msg.tag_ref)
    elif isinstance(msg, Negotiation):
        w.fixed(msg.key_id, KEY_ID_BYTES)
        w.uint(len(msg.share_tags), 2)
        for x, tag in msg.share_tags:
            w.uint(x, 1)
            w.fixed(tag, TAG_BYTES)
    elif isinstance(msg, Finalize):
        w.fixed(msg.key_id, KEY_ID_BYTES)
        w.uint(len(msg.accepted), 2)
        for x in msg.accepted:
            w.uint(x, 1)
        w.fixed(msg.key_tag, TAG_BYTES)
    else:
        raise UnknownMessageType(f"cannot encode {type(msg).__name__}")


def signed_bytes(msg: Message) -> bytes:
    """The canonical bytes a message tag covers."""
    w = _Writer()
    _write_fields(w, msg)
    return w.getvalue()


def encode(msg: Message) -> bytes:
    w = _Writer()
    _write_fields(w, msg)
    if is_tagged(msg):
        w.fixed(msg.message_tag, TAG_BYTES)
    body = w.getvalue()
    return len(body).to_bytes(4, "big") + body


# -- decoding ---------------------------------------------------------------


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.pos = 0

    def take(self, width: int) -> bytes:
        if self.pos + width > len(self.raw):
            raise Truncated(f"need {width} bytes at offset {self.pos}, frame has {len(self.raw)}")
        out = self.raw[self.pos : self.pos + width]
        self.pos += width
        return out

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def blob(self, prefix: int) -> bytes:
        return self.take(self.uint(prefix))

    def ref(self) -> SliceRef:
        return SliceRef(self.uint(8), self.uint(8), self.uint(8))

    def flags(self, allowed: int) -> int:
        value = self.uint(1)
        if value & ~allowed:
            raise FieldOverflow(f"unknown flag bits {value:#04x}")
        return value


def _read_fields(r: _Reader, kind: int) -> Message:
    if kind == KeyRequest.TYPE:
        sender, receiver, key_id = r.take(ID_BYTES), r.take(ID_BYTES), r.take(KEY_ID_BYTES)
        n, k, x = r.uint(2), r.uint(2), r.uint(1)
        share_ref = r.ref()
        flags = r.flags(_FLAG_ENCRYPTED | _FLAG_KEY_TAG)
        encrypted = r.blob(4) if flags & _FLAG_ENCRYPTED else None
        if encrypted is not None and len(encrypted) != share_ref.length:
            raise FieldOverflow("encrypted share length differs from its slice")
        key_tag = r.take(TAG_BYTES) if flags & _FLAG_KEY_TAG else None
        tag_ref = r.ref()
        return KeyRequest(sender, receiver, key_id, n, k, x, share_ref, encrypted, key_tag, tag_ref, r.take(TAG_BYTES))
    if kind == KeyInstruction.TYPE:
        hub, sender, key_id = r.take(ID_BYTES), r.take(ID_BYTES), r.take(KEY_ID_BYTES)
        n, k, x = r.uint(2), r.uint(2), r.uint(1)
        share_ref = r.ref()
        flags = r.flags(_FLAG_KEY_TAG)
        encrypted = r.blob(4)
        if len(encrypted) != share_ref.length:
            raise FieldOverflow("encrypted share length differs from its slice")
        key_tag = r.take(TAG_BYTES) if flags & _FLAG_KEY_TAG else None
        tag_ref = r.ref()
        return KeyInstruction(hub, sender, key_id, n, k, x, share_ref, encrypted, key_tag, tag_ref, r.take(TAG_BYTES))
    if kind == IdentityQuery.TYPE:
        return IdentityQuery(r.take(ID_BYTES), r.take(ID_BYTES))
    if kind == IdentityResponse.TYPE:
        hub, querier, subject = r.take(ID_BYTES), r.take(ID_BYTES), r.take(ID_BYTES)
        record = r.blob(2)
        return IdentityResponse(hub, querier, subject, record, r.ref(), r.take(TAG_BYTES))
    if kind == Negotiation.TYPE:
        key_id = r.take(KEY_ID_BYTES)
        pairs = tuple((r.uint(1), r.take(TAG_BYTES)) for _ in range(r.uint(2)))
        return Negotiation(key_id, pairs, r.take(TAG_BYTES))
    if kind == Finalize.TYPE:
        key_id = r.take(KEY_ID_BYTES)
        accepted = tuple(r.uint(1) for _ in range(r.uint(2)))
        return Finalize(key_id, accepted, r.take(TAG_BYTES), r.take(TAG_BYTES))
    raise UnknownMessageType(f"unknown message type {kind:#04x}")


def frame_length(buffer: bytes) -> int | None:
    """Total size of the first frame in ``buffer``, or None if incomplete."""
    if len(buffer) < 4:
        return None
    total = 4 + int.from_bytes(buffer[:4], "big")
    return total if len(buffer) >= total else None


def decode(frame: bytes) -> Message:
    frame = bytes(frame)
    if len(frame) < 5:
        raise Truncated("frame shorter than its header")
    length = int.from_bytes(frame[:4], "big")
    if length >= MAX_FRAME:
        raise FieldOverflow("frame length exceeds limit")
    if len(frame) - 4 < length:
        raise Truncated(f"frame announces {length} bytes, holds {len(frame) - 4}")
    if len(frame) - 4 > length:
        raise FieldOverflow("bytes after the end of the frame")
    r = _Reader(frame[4:])
    msg = _read_fields(r, r.uint(1))
    if r.pos != length:
        raise FieldOverflow("frame length disagrees with its fields")
    return msg


def split_frames(stream: bytes) -> tuple[list[bytes], bytes]:
    """Cut complete frames off the front of a byte stream."""
    frames = []
    while (size := frame_length(stream)) is not None:
        frames.append(stream[:size])
        stream = stream[size:]
    return frames, stream
