"""Processing-cost benchmark for share generation and reconstruction.

Only share arithmetic and key-tag work is timed; table reads, framing and
transport are left out.  The sender side is share completion plus the key
tag plus encrypting the n - k derived shares.  The receiver side is the
client's own candidate search over the delivered shares.

Corruption modes for the receiver:

``mismatched``
    corrupted shares fail their message tag and never reach reconstruction.
``matching``
    corrupted shares arrive with valid message tags (a compromised hub) and
    force subset enumeration; configurations whose C(s, k) exceeds
    ``enum_cap`` are skipped and reported as such.
"""

from __future__ import annotations

import csv
import math
import random
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .client import Client, _Received
from .hub import xor_bytes
from .sharing import SchemeParams, Share, complete_shares
from .tags import TAG_KEY_BYTES, compute_tag

MBIT8 = 1 << 20  # an 8 Mbit agreed secret, in bytes


@dataclass(frozen=True)
class BenchRow:
    n: int
    k: int
    s: int
    corrupted: int
    mode: str
    party: str
    seconds: float
    subsets: int = 1
    skipped: bool = False
    m_bytes: int = MBIT8

    @property
    def ms_per_mbit(self) -> float:
        # Mbit = 2^20 bits; NaN for skipped rows
        return 1000.0 * self.seconds / (8 * self.m_bytes / (1 << 20))


def _best(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _setup(n: int, k: int, m: int, rng: random.Random):
    params = SchemeParams(n, k)
    length = m + TAG_KEY_BYTES
    fixed = [Share(i + 1, rng.randbytes(length)) for i in range(k)]
    pads = [rng.randbytes(length) for _ in range(n)]
    return params, fixed, pads


def time_sender(n: int, k: int, m: int = MBIT8, *, repeat: int = 3, seed: int = 0) -> float:
    params, fixed, pads = _setup(n, k, m, random.Random(seed))

    def work() -> None:
        shares, bundle = complete_shares(params, fixed)
        compute_tag(bundle.tag_key, bundle.key)
        for share, pad in zip(shares[k:], pads[k:]):
            xor_bytes(share.data, pad)

    return _best(work, repeat)


def time_receiver(
    n: int,
    k: int,
    s: int,
    m: int = MBIT8,
    *,
    corrupted: int = 0,
    mode: str = "none",
    repeat: int = 3,
    seed: int = 0,
    enum_cap: int = 64,
) -> tuple[float, int]:
    """Seconds for B's validation and the number of k-subsets it may examine."""
    if not k <= s <= n:
        raise ValueError("need k <= s <= n")
    rng = random.Random(seed)
    params, fixed, _ = _setup(n, k, m, rng)
    shares, bundle = complete_shares(params, fixed)
    key_tag = compute_tag(bundle.tag_key, bundle.key)
    delivered = shares[:s]
    if mode == "mismatched":
        delivered = delivered[corrupted:]
    elif mode == "matching":
        delivered = [Share(sh.x, rng.randbytes(len(sh.data))) for sh in delivered[:corrupted]] + delivered[corrupted:]
    elif mode != "none":
        raise ValueError(f"unknown corruption mode {mode!r}")
    subsets = math.comb(len(delivered), k) if mode == "matching" and corrupted else 1
    if len(delivered) < k or subsets > enum_cap:
        return float("nan"), subsets
    group = [_Received(bytes(16), bytes(16), sh.x, n, k, key_tag, sh.data) for sh in delivered]
    genuine = len(delivered) - (corrupted if mode == "matching" else 0)

    def work() -> None:
        found = Client._candidates(params, group, key_tag)
        if len(found) != (1 if genuine >= k else 0):
            raise AssertionError("benchmark reconstruction lost the genuine secret")

    return _best(work, repeat), subsets


def sweep(
    n_values: Iterable[int],
    k_values: Iterable[int] | None = None,
    *,
    m: int = MBIT8,
    s_values: str = "full",
    corruption: Iterable[tuple[str, int]] = (("none", 0),),
    repeat: int = 3,
    enum_cap: int = 64,
    seed: int = 0,
) -> list[BenchRow]:
    """Rows for every 1 <= k <= n (or the given k) and s in [k, n] (``s_values="all"``) or s = n."""
    rows = []
    k_filter = None if k_values is None else set(k_values)
    for n in n_values:
        for k in range(1, n + 1):
            if k_filter is not None and k not in k_filter:
                continue
            rows.append(BenchRow(n, k, n, 0, "none", "A", time_sender(n, k, m, repeat=repeat, seed=seed), m_bytes=m))
            s_range = range(k, n + 1) if s_values == "all" else [n]
            for s in s_range:
                for mode, c in corruption:
                    if c > s:
                        continue
                    secs, subsets = time_receiver(
                        n, k, s, m, corrupted=c, mode=mode, repeat=repeat, seed=seed, enum_cap=enum_cap
                    )
                    rows.append(BenchRow(n, k, s, c, mode, "B", secs, subsets, secs != secs, m_bytes=m))
    return rows


COLUMNS = [f.name for f in fields(BenchRow)] + ["ms_per_mbit"]


def write_csv(rows: list[BenchRow], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for r in rows:
            d = asdict(r)
            writer.writerow([d[c] for c in COLUMNS[:-1]] + [f"{r.ms_per_mbit:.4f}"])
    # whitespace-separated copy for gnuplot
    with path.with_suffix(".dat").open("w") as fh:
        fh.write("# " + " ".join(COLUMNS) + "\n")
        for r in rows:
            d = asdict(r)
            fh.write(" ".join(str(d[c]) for c in COLUMNS[:-1]) + f" {r.ms_per_mbit:.4f}\n")


def fit_k_squared(ks: Iterable[int], times: Iterable[float]) -> tuple[float, float]:
    """Least-squares c for t = c k^2 and the coefficient of determination."""
    x = np.asarray(list(ks), dtype=float) ** 2
    t = np.asarray(list(times), dtype=float)
    c = float(x @ t / (x @ x))
    ss_res = float(((t - c * x) ** 2).sum())
    ss_tot = float(((t - t.mean()) ** 2).sum())
    return c, 1.0 - ss_res / ss_tot if ss_tot else 0.0
