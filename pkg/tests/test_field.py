import numpy as np
import pytest
from hypothesis import given, strategies as st

from dske.errors import ZeroInverse
from dske.field import (
    GF256,
    BinaryField,
    Gf64Scaler,
    clmul,
    gf256_inv,
    gf256_mul,
    gf64ext_mul,
    poly_mod,
)

GF64_POLY = (1 << 64) | 0x1B
u64 = st.integers(min_value=0, max_value=(1 << 64) - 1)


def test_gf256_table_matches_polynomial_oracle():
    for a in range(256):
        for b in range(256):
            assert gf256_mul(a, b) == poly_mod(clmul(a, b), 0x11B)


@pytest.mark.parametrize("a,b,product", [(0x57, 0x83, 0xC1), (0x53, 0xCA, 0x01), (0x57, 0x13, 0xFE)])
def test_gf256_known_products(a, b, product):
    assert gf256_mul(a, b) == product


def test_gf256_inverses():
    for a in range(1, 256):
        assert gf256_mul(a, gf256_inv(a)) == 1
    with pytest.raises(ZeroInverse):
        gf256_inv(0)


def test_reducible_modulus_rejected():
    with pytest.raises(ValueError):
        BinaryField(4, 0b10101)  # (x^2+x+1)^2
    with pytest.raises(ValueError):
        BinaryField(4, 0x11B)


def test_small_field_is_a_field():
    f = BinaryField(4, 0x13)
    elems = range(16)
    for a in elems:
        for b in elems:
            for c in elems:
                assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
    # the multiplicative group is cyclic of order 15
    assert f.pow(2, 15) == 1 and all(f.pow(2, e) != 1 for e in range(1, 15))


@pytest.mark.parametrize("size", [1, 7, 63, 64, 1000, 4097])
def test_scale_matches_table(size):
    data = np.random.default_rng(size).integers(0, 256, size, dtype=np.uint8)
    for c in (0, 1, 2, 0x53, 0xFF):
        expected = GF256.mul_table[c][data]
        assert np.array_equal(GF256.scale(c, data), expected)


def test_scale_xor_into_accumulates():
    rng = np.random.default_rng(3)
    a, b = rng.integers(0, 256, (2, 256), dtype=np.uint8)
    acc = a.copy()
    GF256.scale_xor_into(acc, 0x1D, b)
    assert np.array_equal(acc, a ^ GF256.mul_table[0x1D][b])


@given(u64, u64)
def test_gf64_matches_polynomial_oracle(a, b):
    assert gf64ext_mul(a, b) == poly_mod(clmul(a, b), GF64_POLY)


@given(u64, u64, u64)
def test_gf64_distributes(a, b, c):
    assert gf64ext_mul(a, b ^ c) == gf64ext_mul(a, b) ^ gf64ext_mul(a, c)


@given(u64, st.lists(u64, min_size=1, max_size=20))
def test_gf64_scaler_matches_scalar(c, values):
    out = Gf64Scaler(c)(np.array(values, dtype=np.uint64))
    assert [int(v) for v in out] == [gf64ext_mul(c, v) for v in values]
