"""(n, k) secret sharing over byte strings.

Two schemes are provided:

``shamir``
    One polynomial of degree k-1 per byte offset, all sharing the same
    x-coordinates. The secret sits at x = 0.
``xor``
    The (n, n) scheme where the secret is the XOR of every share.

Interpolation is done with Lagrange coefficients computed once per set of
known coordinates and then applied to whole byte arrays, so the per-offset
cost is one table lookup per (known share, output) pair.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BadParams, DuplicateCoordinate, InsufficientShares, LengthMismatch
from .field import GF256, BinaryField
from .tags import TAG_KEY_BYTES


class SchemeKind(str, enum.Enum):
    SHAMIR = "shamir"
    XOR = "xor"


@dataclass(frozen=True)
class SchemeParams:
    n: int
    k: int
    kind: SchemeKind = SchemeKind.SHAMIR

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if not 1 <= self.k <= self.n:
            raise BadParams(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if self.kind is SchemeKind.XOR and self.k != self.n:
            raise BadParams("the xor scheme requires k == n")
        if self.kind is SchemeKind.SHAMIR and self.n >= 256:
            raise BadParams("shamir over GF(2^8) supports at most 255 shares")


@dataclass(frozen=True)
class Share:
    x: int
    data: bytes

    def __post_init__(self) -> None:
        if self.x <= 0:
            raise BadParams("x = 0 is reserved for the secret")

    def array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8)


@dataclass(frozen=True)
class SecretBundle:
    """The reconstructed secret Y_0 = u || S."""

    secret: bytes
    tag_key_len: int = TAG_KEY_BYTES

    def __post_init__(self) -> None:
        if len(self.secret) < self.tag_key_len:
            raise LengthMismatch("secret is shorter than its tag key")

    @property
    def tag_key(self) -> bytes:
        return self.secret[: self.tag_key_len]

    @property
    def key(self) -> bytes:
        return self.secret[self.tag_key_len :]


def _check_shares(shares: Sequence[Share]) -> int:
    xs = [s.x for s in shares]
    if len(set(xs)) != len(xs):
        raise DuplicateCoordinate(f"repeated x-coordinate in {sorted(xs)}")
    lengths = {len(s.data) for s in shares}
    if len(lengths) > 1:
        raise LengthMismatch(f"shares have differing lengths {sorted(lengths)}")
    return lengths.pop() if lengths else 0


@functools.lru_cache(maxsize=1024)
def lagrange_matrix(
    field: BinaryField, known: tuple[int, ...], targets: tuple[int, ...]
) -> tuple[tuple[int, ...], ...]:
    """Coefficients ``c[t][j]`` with ``y(targets[t]) = sum_j c[t][j] * y(known[j])``."""
    rows = []
    for t in targets:
        row = []
        for j, xj in enumerate(known):
            num, den = 1, 1
            for m, xm in enumerate(known):
                if m != j:
                    num = field.mul(num, t ^ xm)
                    den = field.mul(den, xj ^ xm)
            row.append(field.div(num, den))
        rows.append(tuple(row))
    return tuple(rows)


def interpolate(
    field: BinaryField,
    known: Sequence[int],
    data: Sequence[np.ndarray],
    targets: Sequence[int],
) -> list[np.ndarray]:
    """Evaluate the polynomial through ``(known[j], data[j])`` at each target."""
    matrix = lagrange_matrix(field, tuple(known), tuple(targets))
    out = []
    for row in matrix:
        acc = np.zeros_like(data[0])
        for c, y in zip(row, data):
            field.scale_xor_into(acc, c, y)
        out.append(acc)
    return out


def _xor_all(arrays: Iterable[np.ndarray]) -> np.ndarray:
    arrays = list(arrays)
    acc = arrays[0].copy()
    for a in arrays[1:]:
        np.bitwise_xor(acc, a, out=acc)
    return acc


def default_coords(n: int) -> list[int]:
    """Hub i (0-based) gets x = i + 1."""
    return list(range(1, n + 1))


def complete_shares(
    params: SchemeParams,
    fixed: Sequence[Share],
    xs: Sequence[int] | None = None,
    *,
    field: BinaryField = GF256,
    tag_key_len: int = TAG_KEY_BYTES,
) -> tuple[list[Share], SecretBundle]:
    """Extend k fixed shares to all n shares and compute the secret.

    ``xs`` lists the coordinates of all n shares in output order and must
    contain the fixed coordinates; by default it is ``1..n``.
    """
    if len(fixed) != params.k:
        raise BadParams(f"expected {params.k} fixed shares, got {len(fixed)}")
    _check_shares(fixed)
    xs = list(default_coords(params.n) if xs is None else xs)
    if len(xs) != params.n or len(set(xs)) != params.n:
        raise BadParams("xs must list n distinct coordinates")
    if any(x <= 0 or x >= field.order for x in xs):
        raise BadParams("coordinates must be nonzero field elements")
    by_x = {s.x: s for s in fixed}
    if not set(by_x) <= set(xs):
        raise BadParams("fixed shares must sit at listed coordinates")

    if params.kind is SchemeKind.XOR:
        secret = _xor_all(s.array() for s in fixed)
        ordered = [by_x[x] for x in xs]
        return ordered, SecretBundle(secret.tobytes(), tag_key_len)

    known = [s.x for s in fixed]
    data = [s.array() for s in fixed]
    missing = [x for x in xs if x not in by_x]
    values = interpolate(field, known, data, [0] + missing)
    derived = {x: Share(x, v.tobytes()) for x, v in zip(missing, values[1:])}
    ordered = [by_x.get(x) or derived[x] for x in xs]
    return ordered, SecretBundle(values[0].tobytes(), tag_key_len)


def reconstruct(
    params: SchemeParams,
    subset: Sequence[Share],
    *,
    field: BinaryField = GF256,
    tag_key_len: int = TAG_KEY_BYTES,
) -> SecretBundle:
    """Recover the secret from at least k shares (shamir uses the first k)."""
    _check_shares(subset)
    if len(subset) < params.k:
        raise InsufficientShares(f"need {params.k} shares, got {len(subset)}")
    if params.kind is SchemeKind.XOR:
        secret = _xor_all(s.array() for s in subset)
        return SecretBundle(secret.tobytes(), tag_key_len)
    base = subset[: params.k]
    (secret,) = interpolate(field, [s.x for s in base], [s.array() for s in base], [0])
    return SecretBundle(secret.tobytes(), tag_key_len)


def derive_other_shares(
    params: SchemeParams,
    subset: Sequence[Share],
    xs: Sequence[int] | None = None,
    *,
    field: BinaryField = GF256,
) -> list[Share]:
    """Predict the share at every coordinate in ``xs`` (default ``1..n``)."""
    _check_shares(subset)
    if len(subset) < params.k:
        raise InsufficientShares(f"need {params.k} shares, got {len(subset)}")
    if params.kind is SchemeKind.XOR:
        return list(subset)
    base = subset[: params.k]
    xs = list(default_coords(params.n) if xs is None else xs)
    by_x = {s.x: s for s in base}
    missing = [x for x in xs if x not in by_x]
    values = interpolate(field, [s.x for s in base], [s.array() for s in base], missing)
    derived = {x: Share(x, v.tobytes()) for x, v in zip(missing, values)}
    return [by_x.get(x) or derived[x] for x in xs]
