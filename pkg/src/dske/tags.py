"""One-time polynomial-evaluation tags.

A tag key is 16 bytes, split into an evaluation point ``kappa`` and a pad
``beta`` (both GF(2^64) elements, big-endian).  The message is zero-padded to
64-bit blocks ``m_1 .. m_L`` and followed by one length block holding the bit
length of the unpadded message.  With ``b_1 .. b_{L+1}`` that block sequence::

    tag = beta + sum_i b_i * kappa^(L + 2 - i)

which is Horner's rule ``acc = (acc + b_i) * kappa`` finished by adding the
pad.  For two distinct messages of at most L blocks and a uniformly random
key, the chance that a forged (message, tag) pair verifies is at most
``(L + 1) / 2^64``.  Keys must never be reused.
"""

from __future__ import annotations

import hmac
import struct
from typing import NamedTuple

import numpy as np

from .field import BinaryField, Gf64Scaler, reduce64, gf64ext_mul

TAG_KEY_BYTES = 16
TAG_BYTES = 8

# below this many blocks the scalar loop beats building lookup tables
_VECTOR_THRESHOLD = 2048


class TagKey(NamedTuple):
    kappa: int
    beta: int

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TagKey":
        if len(raw) != TAG_KEY_BYTES:
            raise ValueError(f"tag key must be {TAG_KEY_BYTES} bytes, got {len(raw)}")
        return cls(int.from_bytes(raw[:8], "big"), int.from_bytes(raw[8:], "big"))


def _blocks(message: bytes) -> np.ndarray:
    pad = (-len(message)) % 8
    body = np.frombuffer(message + bytes(pad), dtype=">u8").astype(np.uint64)
    length = np.array([8 * len(message)], dtype=np.uint64)
    return np.concatenate([body, length])


def _fold(blocks: np.ndarray, kappa: int) -> int:
    """Return sum_c blocks[c] * kappa^(N-1-c) by pairwise folding."""
    h = blocks
    k = kappa
    while len(h) > 1:
        if len(h) % 2:
            h = np.concatenate([np.zeros(1, dtype=np.uint64), h])
        h = Gf64Scaler(k)(h[0::2]) ^ h[1::2]
        k = gf64ext_mul(k, k)
    return int(h[0])


def _horner(message: bytes, kappa: int) -> int:
    # carry-less multiples of kappa by every byte value; a product with kappa
    # is then eight shifted lookups followed by one reduction
    window = [0] * 256
    for j in range(1, 256):
        window[j] = (window[j >> 1] << 1) ^ (kappa if j & 1 else 0)

    def times_kappa(v: int) -> int:
        r = 0
        for shift in (56, 48, 40, 32, 24, 16, 8, 0):
            r ^= window[(v >> shift) & 0xFF] << shift
        return reduce64(r)

    pad = (-len(message)) % 8
    padded = message + bytes(pad)
    acc = 0
    for (block,) in struct.iter_unpack(">Q", padded):
        acc = times_kappa(acc ^ block)
    return times_kappa(acc ^ (8 * len(message)))


def compute_tag(key: TagKey | bytes, message: bytes) -> bytes:
    if not isinstance(key, TagKey):
        key = TagKey.from_bytes(bytes(key))
    message = bytes(message)
    if len(message) // 8 < _VECTOR_THRESHOLD:
        acc = _horner(message, key.kappa)
    else:
        acc = gf64ext_mul(_fold(_blocks(message), key.kappa), key.kappa)
    return (acc ^ key.beta).to_bytes(TAG_BYTES, "big")


def verify_tag(key: TagKey | bytes, message: bytes, tag: bytes) -> bool:
    # compare_digest does not stop at the first differing byte
    return hmac.compare_digest(compute_tag(key, message), bytes(tag))


def reduced_tag(
    field: BinaryField, kappa: np.ndarray, beta: np.ndarray, message: np.ndarray
) -> np.ndarray:
    """The same construction over a small field, vectorised across trials.

    ``message`` has shape ``(trials, blocks)`` with one field element per
    block; ``kappa`` and ``beta`` have shape ``(trials,)``.  The length block
    is the message bit length reduced modulo the field order.  Used to
    measure forgery and collision rates at widths where they are observable.
    """
    kappa = np.asarray(kappa, dtype=np.uint8)
    beta = np.asarray(beta, dtype=np.uint8)
    message = np.atleast_2d(np.asarray(message, dtype=np.uint8))
    acc = np.zeros(message.shape[0], dtype=np.uint8)
    for col in range(message.shape[1]):
        acc = field.mul_arrays(acc ^ message[:, col], kappa)
    length = (field.width * message.shape[1]) % field.order
    acc = field.mul_arrays(acc ^ np.uint8(length), kappa)
    return acc ^ beta
