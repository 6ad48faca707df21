import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dske.field import GF256, BinaryField, gf64ext_mul
from dske.tags import TagKey, _fold, _blocks, _horner, compute_tag, reduced_tag, verify_tag


def key(kappa: int, beta: int) -> bytes:
    return kappa.to_bytes(8, "big") + beta.to_bytes(8, "big")


def formula(kappa: int, beta: int, message: bytes) -> int:
    """beta + sum_i b_i kappa^(L+2-i), evaluated term by term."""
    blocks = [int(b) for b in _blocks(message)]
    acc = beta
    top = len(blocks)
    for i, b in enumerate(blocks):
        power = 1
        for _ in range(top - i):
            power = gf64ext_mul(power, kappa)
        acc ^= gf64ext_mul(b, power)
    return acc


def test_degenerate_keys():
    assert compute_tag(key(0, 0xBEEF), b"anything at all") == (0xBEEF).to_bytes(8, "big")
    assert verify_tag(key(0, 0xBEEF), b"other", (0xBEEF).to_bytes(8, "big"))
    assert compute_tag(key(0x1234, 0), b"") == bytes(8)


def test_unit_point_collapses_to_xor():
    m1, m2 = 0x0102030405060708, 0x1112131415161718
    msg = m1.to_bytes(8, "big") + m2.to_bytes(8, "big")
    assert int.from_bytes(compute_tag(key(1, 0), msg), "big") == m1 ^ m2 ^ 128


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.binary(max_size=100))
def test_matches_formula(kappa, beta, message):
    assert int.from_bytes(compute_tag(key(kappa, beta), message), "big") == formula(kappa, beta, message)


@pytest.mark.parametrize("size", [0, 1, 8, 9, 4096, 20000, 123457])
def test_fold_agrees_with_horner(size):
    rng = random.Random(size)
    message = rng.randbytes(size)
    kappa = rng.getrandbits(64)
    assert gf64ext_mul(_fold(_blocks(message), kappa), kappa) == _horner(message, kappa)


def test_frozen_vector():
    k = bytes.fromhex("0123456789abcdeffedcba9876543210")
    assert compute_tag(k, b"distributed symmetric key exchange").hex() == FROZEN_TAG


FROZEN_TAG = "898e71c461dfe4e2"


def test_tag_detects_appended_zero_byte():
    rng = random.Random(5)
    for _ in range(200):
        k = rng.randbytes(16)
        m = rng.randbytes(rng.randrange(40))
        assert not verify_tag(k, m + b"\x00", compute_tag(k, m))
        assert verify_tag(k, m, compute_tag(k, m))


def test_key_parsing():
    assert TagKey.from_bytes(key(5, 6)) == TagKey(5, 6)
    with pytest.raises(ValueError):
        TagKey.from_bytes(b"short")


def test_reduced_tag_matches_scalar_oracle():
    f = BinaryField(4, 0x13)
    rng = np.random.default_rng(1)
    msgs = rng.integers(0, 16, (50, 3), dtype=np.uint8)
    kappa = rng.integers(0, 16, 50, dtype=np.uint8)
    beta = rng.integers(0, 16, 50, dtype=np.uint8)
    out = reduced_tag(f, kappa, beta, msgs)
    for t in range(50):
        acc = 0
        for b in list(msgs[t]) + [(4 * 3) % 16]:
            acc = f.mul(acc ^ int(b), int(kappa[t]))
        assert out[t] == acc ^ beta[t]


def test_reduced_tag_forgery_bound_exact():
    # exhaustive over all keys: a fixed substitution verifies for at most L keys
    msg = np.array([[1, 2, 3]], dtype=np.uint8)
    forged = np.array([[7, 2, 9]], dtype=np.uint8)
    ks = np.arange(256, dtype=np.uint8)
    bs = np.zeros(256, dtype=np.uint8)
    hits = reduced_tag(GF256, ks, bs, np.repeat(msg, 256, 0)) == reduced_tag(GF256, ks, bs, np.repeat(forged, 256, 0))
    assert hits.sum() <= 4
