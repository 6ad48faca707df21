"""Binary extension field arithmetic.

Two fields are used by the protocol:

* GF(2^8) modulo x^8+x^4+x^3+x+1 (0x11B) carries the secret-sharing math.
  Elements are plain ints in ``range(256)``; bulk operations work on uint8
  numpy arrays, one field element per byte.
* GF(2^64) modulo x^64+x^4+x^3+x+1 carries the polynomial tag hash.
  Elements are plain ints in ``range(2**64)``.

:class:`BinaryField` is generic over small widths (w <= 8) so the same
share and tag code can be instantiated over reduced fields in tests.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import ZeroInverse

GF256_POLY = 0x11B
GF64_POLY_LOW = 0x1B  # x^4 + x^3 + x + 1, the part of the modulus below x^64
MASK64 = (1 << 64) - 1


def clmul(a: int, b: int) -> int:
    """Carry-less product of two non-negative ints."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def poly_mod(a: int, poly: int) -> int:
    """Reduce ``a`` modulo the binary polynomial ``poly``."""
    deg = poly.bit_length() - 1
    while a.bit_length() - 1 >= deg:
        a ^= poly << (a.bit_length() - 1 - deg)
    return a


class BinaryField:
    """GF(2^w) for 1 <= w <= 8 backed by full multiplication tables."""

    def __init__(self, width: int, poly: int):
        if not 1 <= width <= 8:
            raise ValueError("table-backed fields support 1 <= width <= 8")
        if poly.bit_length() - 1 != width:
            raise ValueError("modulus degree must equal the field width")
        self.width = width
        self.poly = poly
        self.order = 1 << width
        q = self.order
        table = np.zeros((q, q), dtype=np.uint8)
        for a in range(q):
            for b in range(a, q):
                table[a, b] = table[b, a] = poly_mod(clmul(a, b), poly)
        inv = np.zeros(q, dtype=np.uint8)
        for a in range(1, q):
            hits = np.flatnonzero(table[a] == 1)
            if len(hits) != 1:
                raise ValueError(f"modulus {poly:#x} is not irreducible")
            inv[a] = hits[0]
        table.setflags(write=False)
        inv.setflags(write=False)
        self.mul_table = table
        self.inv_table = inv

    def __repr__(self) -> str:
        return f"BinaryField(width={self.width}, poly={self.poly:#x})"

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[a, b])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroInverse("zero has no multiplicative inverse")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        r = 1
        for _ in range(e):
            r = self.mul(r, a)
        return r

    @functools.lru_cache(maxsize=4096)
    def _pair_table(self, c: int) -> np.ndarray:
        # 65536-entry table mapping a uint16 (two packed elements) to both
        # products at once; halves the number of gathers on long arrays.
        row = np.zeros(256, dtype=np.uint16)
        row[: self.order] = self.mul_table[c]
        return ((row[:, None] << 8) | row[None, :]).ravel()

    def scale(self, c: int, data: np.ndarray) -> np.ndarray:
        """Return ``c * data`` elementwise for a uint8 array ``data``."""
        if c == 0:
            return np.zeros_like(data)
        if c == 1:
            return data.copy()
        if data.size % 2 or data.size < 64:
            return np.take(self.mul_table[c], data)
        out = np.take(self._pair_table(c), data.view(np.uint16))
        return out.view(np.uint8)

    def scale_xor_into(self, acc: np.ndarray, c: int, data: np.ndarray) -> None:
        """``acc ^= c * data`` in place."""
        if c == 0:
            return
        if c == 1:
            np.bitwise_xor(acc, data, out=acc)
            return
        np.bitwise_xor(acc, self.scale(c, data), out=acc)

    def mul_arrays(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise product of two equally shaped uint8 arrays."""
        return self.mul_table[a, b]


GF256 = BinaryField(8, GF256_POLY)


def gf256_add(a: int, b: int) -> int:
    return a ^ b


def gf256_mul(a: int, b: int) -> int:
    return int(GF256.mul_table[a, b])


def gf256_inv(a: int) -> int:
    return GF256.inv(a)


def reduce64(r: int) -> int:
    # x^64 == x^4 + x^3 + x + 1; two folds clear any product of 64-bit inputs
    hi = r >> 64
    r = (r & MASK64) ^ hi ^ (hi << 1) ^ (hi << 3) ^ (hi << 4)
    hi = r >> 64
    return (r & MASK64) ^ hi ^ (hi << 1) ^ (hi << 3) ^ (hi << 4)


def gf64ext_mul(a: int, b: int) -> int:
    """Product in GF(2^64) modulo x^64+x^4+x^3+x+1."""
    return reduce64(clmul(a, b))


def _mul_x(a: int) -> int:
    a <<= 1
    if a >> 64:
        a = (a & MASK64) ^ GF64_POLY_LOW
    return a


class Gf64Scaler:
    """Vectorised multiplication of uint64 arrays by a fixed GF(2^64) element.

    Multiplication by a constant is GF(2)-linear, so the product of any
    64-bit word decomposes into eight per-byte lookups into reduced tables.
    """

    def __init__(self, c: int):
        self.c = c
        basis = []
        v = c
        for _ in range(64):
            basis.append(v)
            v = _mul_x(v)
        basis_arr = np.array(basis, dtype=np.uint64).reshape(8, 8)
        bits = (np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1
        tables = np.zeros((8, 256), dtype=np.uint64)
        for j in range(8):
            picked = np.where(bits.astype(bool), basis_arr[j][None, :], np.uint64(0))
            tables[j] = np.bitwise_xor.reduce(picked, axis=1)
        self.tables = tables

    def __call__(self, v: np.ndarray) -> np.ndarray:
        t = self.tables
        out = np.take(t[0], (v & np.uint64(0xFF)).astype(np.intp))
        for j in range(1, 8):
            idx = ((v >> np.uint64(8 * j)) & np.uint64(0xFF)).astype(np.intp)
            out ^= np.take(t[j], idx)
        return out
