import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dske.errors import BadParams, DuplicateCoordinate, InsufficientShares, LengthMismatch
from dske.field import BinaryField
from dske.sharing import (
    SchemeKind,
    SchemeParams,
    SecretBundle,
    Share,
    complete_shares,
    derive_other_shares,
    reconstruct,
)

XOR = SchemeKind.XOR


def test_line_through_two_points():
    shares, bundle = complete_shares(SchemeParams(3, 2), [Share(1, b"\x2b"), Share(2, b"\x28")], tag_key_len=0)
    assert shares[2] == Share(3, b"\x29")
    assert bundle.secret == b"\x2a"
    assert reconstruct(SchemeParams(3, 2), [Share(2, b"\x28"), Share(3, b"\x29")], tag_key_len=0).secret == b"\x2a"
    predicted = derive_other_shares(SchemeParams(3, 2), shares[:2], [3])
    assert predicted == [Share(3, b"\x29")]


def test_xor_scheme_examples():
    _, bundle = complete_shares(SchemeParams(2, 2, XOR), [Share(1, b"\x0f"), Share(2, b"\xf0")], tag_key_len=0)
    assert bundle.secret == b"\xff"
    assert reconstruct(SchemeParams(2, 2, XOR), [Share(1, b"\xaa"), Share(2, b"\xaa")], tag_key_len=0).secret == b"\x00"
    shares = [Share(1, b"\x01"), Share(2, b"\x02")]
    assert derive_other_shares(SchemeParams(2, 2, XOR), shares) == shares


def test_single_share_scheme_is_identity():
    data = bytes(range(40))
    _, bundle = complete_shares(SchemeParams(1, 1), [Share(1, data)])
    assert bundle.secret == data
    assert bundle.tag_key == data[:16] and bundle.key == data[16:]


def test_errors():
    p = SchemeParams(3, 2)
    with pytest.raises(InsufficientShares):
        reconstruct(p, [Share(1, b"\x00")], tag_key_len=0)
    with pytest.raises(LengthMismatch):
        derive_other_shares(p, [Share(1, b"\x00"), Share(2, b"\x00\x00")])
    with pytest.raises(DuplicateCoordinate):
        reconstruct(p, [Share(1, b"\x00"), Share(1, b"\x01")], tag_key_len=0)
    with pytest.raises(BadParams):
        SchemeParams(2, 3)
    with pytest.raises(BadParams):
        SchemeParams(3, 2, XOR)
    with pytest.raises(BadParams):
        Share(0, b"\x00")
    with pytest.raises(BadParams):
        complete_shares(p, [Share(1, b"\x00")])
    with pytest.raises(LengthMismatch):
        SecretBundle(b"short")


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_any_k_subset_recovers_the_secret(data):
    n = data.draw(st.integers(1, 12))
    k = data.draw(st.integers(1, n))
    length = data.draw(st.integers(16, 80))
    fixed = [Share(i + 1, data.draw(st.binary(min_size=length, max_size=length))) for i in range(k)]
    shares, bundle = complete_shares(SchemeParams(n, k), fixed)
    assert shares[:k] == fixed
    subset = data.draw(st.permutations(shares)).copy()[:k]
    assert reconstruct(SchemeParams(n, k), subset) == bundle
    # every share lies on the same polynomial
    assert derive_other_shares(SchemeParams(n, k), subset) == shares


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.binary(min_size=16, max_size=48), st.randoms(use_true_random=False))
def test_xor_round_trip(n, first, rnd):
    fixed = [Share(1, first)] + [Share(i + 2, rnd.randbytes(len(first))) for i in range(n - 1)]
    shares, bundle = complete_shares(SchemeParams(n, n, XOR), fixed)
    assert reconstruct(SchemeParams(n, n, XOR), shares[::-1]) == bundle


def test_custom_coordinates():
    fixed = [Share(7, b"\x11" * 16), Share(200, b"\x22" * 16)]
    xs = [200, 7, 33]
    shares, bundle = complete_shares(SchemeParams(3, 2), fixed, xs)
    assert [s.x for s in shares] == xs
    assert reconstruct(SchemeParams(3, 2), [shares[2], shares[0]]) == bundle


def test_fewer_than_k_shares_hide_the_secret_small_field():
    # GF(16), n=3, k=2: every value of one share is equally likely under each secret
    f = BinaryField(4, 0x13)
    p = SchemeParams(3, 2)
    counts = np.zeros((16, 3, 16), dtype=int)  # secret, hub, share value
    for r1, r2 in itertools.product(range(16), repeat=2):
        shares, bundle = complete_shares(p, [Share(1, bytes([r1])), Share(2, bytes([r2]))], field=f, tag_key_len=0)
        for i, s in enumerate(shares):
            counts[bundle.secret[0], i, s.data[0]] += 1
    assert (counts == 1).all()
