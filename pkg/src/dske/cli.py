"""Command line entry point: ``dske provision | agree | attack | bench``."""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

from .bench import MBIT8, sweep, write_csv
from .errors import DskeError
from .psk import provision_pair, write_pskm
from .scenarios import bundled_scenarios, load_scenario
from .sharing import SchemeKind
from .simnet import AdversaryScript, ProtocolParams, Topology, run_scenario
from .tags import TAG_KEY_BYTES


def parse_range(text: str) -> list[int]:
    """``"5"``, ``"2-20"`` or ``"2,4,8"`` to a list of ints."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a range: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty range")
    return out


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def cmd_provision(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clients = [c for c in args.clients.split(",") if c]
    written = 0
    for i in range(1, args.hubs + 1):
        hub = f"P{i}"
        for client in clients:
            table, _ = provision_pair(hub, client, args.size, seed=args.seed)
            write_pskm(table, out / f"{hub}_{client}.pskm")
            written += 1
    print(f"wrote {written} PSKM files of {args.size} bytes to {out}")
    return 0


def _usage(message: str) -> int:
    print(f"usage error: {message}", file=sys.stderr)
    return 2


def cmd_agree(args: argparse.Namespace) -> int:
    hubs = args.hubs or args.n
    if not 1 <= args.k <= args.n:
        return _usage(f"need 1 <= k <= n, got n={args.n}, k={args.k}")
    if hubs < args.n:
        return _usage(f"n={args.n} needs at least that many hubs")
    if args.scheme == "xor" and args.k != args.n:
        return _usage("the xor scheme requires k == n")
    if args.adapted and args.k == args.n:
        print("note: adapted protocol with k = n has no spare shares; every share must arrive")
    params = ProtocolParams(args.n, args.k, args.kb, args.m_bytes, SchemeKind(args.scheme), args.adapted)
    need = 2 * (args.m_bytes + 2 * TAG_KEY_BYTES) + 4 * TAG_KEY_BYTES * (args.n + 4)
    topology = Topology.with_hubs(hubs, table_size=need)
    t0 = time.perf_counter()
    report = run_scenario(topology, AdversaryScript(), params, args.seed)
    elapsed = time.perf_counter() - t0
    o = report.last
    for party, key in (("A", o.alice), ("B", o.bob)):
        digest = hashlib.sha256(key.key).hexdigest() if key.key is not None else "-"
        print(f"{party}: {key.outcome()} sha256={digest}")
    for name, used in sorted(report.accounting.items()):
        print(f"table {name}: {used} bytes used")
    if o.bootstrap_use:
        print("bootstrap use: " + ", ".join(f"{k}={v}" for k, v in sorted(o.bootstrap_use.items())))
    print(f"elapsed {elapsed * 1000:.1f} ms")
    return 0 if o.same_key else 1


def cmd_attack(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.scenario] if args.scenario else bundled_scenarios()
    if not paths:
        print("no scenarios given", file=sys.stderr)
        return 2
    failed = 0
    for path in paths:
        scenario = load_scenario(path)
        report, verdicts = scenario.run()
        bad = [v for v in verdicts if not v.ok]
        failed += bool(bad)
        print(f"{'PASS' if not bad else 'FAIL'} {path.name}: {scenario.name}")
        for v in verdicts if args.verbose else bad:
            print("    " + v.line())
        if args.trace and report is not None:
            target = Path(args.trace) / (path.stem + ".log")
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(report.serialize())
    return 1 if failed else 0


def cmd_bench(args: argparse.Namespace) -> int:
    corruption = [("none", 0)]
    for c in args.corrupt:
        corruption += [("mismatched", c), ("matching", c)]
    rows = sweep(
        args.n,
        args.k,
        m=args.m_bytes,
        s_values=args.s,
        corruption=corruption,
        repeat=args.repeat,
        enum_cap=args.enum_cap,
        seed=args.seed,
    )
    if args.out:
        write_csv(rows, args.out)
        print(f"wrote {len(rows)} rows to {args.out} (and {Path(args.out).with_suffix('.dat')})")
    else:
        print("n,k,s,corrupted,mode,party,ms_per_mbit")
        for r in rows:
            print(f"{r.n},{r.k},{r.s},{r.corrupted},{r.mode},{r.party},{r.ms_per_mbit:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dske", description="Distributed symmetric key exchange toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("provision", help="write PSKM files for every hub/client pair")
    p.add_argument("--hubs", type=_positive, required=True)
    p.add_argument("--clients", default="A,B", help="comma-separated client ids")
    p.add_argument("--size", type=_positive, required=True, help="table size in bytes")
    p.add_argument("--seed", type=int, default=None, help="deterministic test mode; omit for OS entropy")
    p.add_argument("--out", default="pskm")
    p.set_defaults(func=cmd_provision)

    p = sub.add_parser("agree", help="run one key agreement over the simulated network")
    p.add_argument("--hubs", type=_positive, default=None, help="hub count (default n)")
    p.add_argument("--n", type=_positive, default=3)
    p.add_argument("--k", type=_positive, default=2)
    p.add_argument("--kb", type=_positive, default=1)
    p.add_argument("--m-bytes", type=_positive, default=32)
    p.add_argument("--scheme", choices=[s.value for s in SchemeKind], default="shamir")
    p.add_argument("--adapted", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("attack", help="run scenario files (default: the bundled corpus)")
    p.add_argument("--scenario", action="append", help="scenario YAML; repeatable")
    p.add_argument("--trace", default=None, help="directory for per-scenario trace logs")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="processing-cost sweep")
    p.add_argument("--n", type=parse_range, default=[9])
    p.add_argument("--k", type=parse_range, default=None)
    p.add_argument("--m-bytes", type=_positive, default=MBIT8)
    p.add_argument("--s", choices=["full", "all"], default="full", help="s = n only, or every s in [k, n]")
    p.add_argument("--corrupt", type=parse_range, default=[], help="corrupted share counts to add")
    p.add_argument("--repeat", type=_positive, default=3)
    p.add_argument("--enum-cap", type=_positive, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV path; a .dat copy is written next to it")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DskeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
