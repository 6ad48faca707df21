"""Deterministic in-process network with a scriptable adversary.

Parties are two clients, ``A`` (initiator) and ``B`` (receiver), and hubs
``P1 .. Pn``.  Every message crosses a named link such as ``A->P2`` or
``P2->B`` as an encoded frame, and the adversary sees every frame.  Per-link
rules can drop, corrupt, replay, inject or reorder frames.  Compromised hubs
hand their full state to the adversary, which decides what they send.

Time is a logical event queue.  When the queue drains, held (reordered)
frames are released first, then compromised hubs act on everything they have
buffered.  This quiescence point is where colluding hubs pool their shares.
All randomness comes from one ``random.Random(seed)``, so a run is a pure
function of (topology, script, parameters, seed).
"""

from __future__ import annotations

import hashlib
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .client import AbortReason, AgreedKey, Client, ReceiverPolicy
from .errors import DskeError, ScriptError
from .field import GF256
from .hub import Hub
from .psk import ident, ident_name, provision_pair
from .sharing import SchemeKind, SchemeParams, Share, interpolate, reconstruct
from .tags import TAG_KEY_BYTES, compute_tag
from .wire import Finalize, IdentityQuery, IdentityResponse, KeyInstruction, KeyRequest, Negotiation, decode, encode

LINK_ACTIONS = ("deliver", "drop", "corrupt", "replay", "inject", "reorder")
BEHAVIOURS = ("passive", "withhold", "junk", "forge_group", "splice", "lie_identity")


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    k: int
    kb: int = 1
    m: int = 32
    scheme: SchemeKind = SchemeKind.SHAMIR
    adapted: bool = False
    identity: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", SchemeKind(self.scheme))
        if not 1 <= self.k <= self.n:
            raise ScriptError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if self.kb < 1:
            raise ScriptError("kb must be at least 1")
        if self.m < 1:
            raise ScriptError("m must be at least one byte")

    def scheme_params(self) -> SchemeParams:
        kind = SchemeKind.XOR if self.scheme is SchemeKind.XOR and self.k == self.n else SchemeKind.SHAMIR
        return SchemeParams(self.n, self.k, kind)


@dataclass(frozen=True)
class Topology:
    hubs: tuple[str, ...]
    table_size: int = 1 << 16
    request_cap: int | None = None

    @classmethod
    def with_hubs(cls, count: int, table_size: int = 1 << 16, request_cap: int | None = None) -> "Topology":
        return cls(tuple(f"P{i}" for i in range(1, count + 1)), table_size, request_cap)

    def links(self) -> set[str]:
        out = {"A->B", "B->A"}
        for h in self.hubs:
            out |= {f"A->{h}", f"{h}->A", f"B->{h}", f"{h}->B"}
        return out


@dataclass(frozen=True)
class LinkRule:
    link: str
    action: str
    run: int | None = None
    index: int | None = None
    positions: tuple[int, ...] = (-1,)
    mask: int = 0x01
    to: str | None = None
    into_run: int | None = None
    frame: bytes | None = None

    def matches(self, run: int, link: str, index: int) -> bool:
        return (
            self.link == link
            and (self.run is None or self.run == run)
            and (self.index is None or self.index == index)
        )


@dataclass
class AdversaryScript:
    compromised: dict[str, str] = field(default_factory=dict)
    rules: list[LinkRule] = field(default_factory=list)
    forge_k: int | None = None

    def validate(self, topology: Topology) -> None:
        links = topology.links()
        for hub, behaviour in self.compromised.items():
            if hub not in topology.hubs:
                raise ScriptError(f"compromised hub {hub!r} is not in the topology")
            if behaviour not in BEHAVIOURS:
                raise ScriptError(f"unknown hub behaviour {behaviour!r}")
        for rule in self.rules:
            if rule.action not in LINK_ACTIONS:
                raise ScriptError(f"unknown link action {rule.action!r}")
            for name in (rule.link, rule.to):
                if name is not None and name not in links:
                    raise ScriptError(f"link {name!r} does not exist")
            if rule.action == "inject" and rule.frame is None:
                raise ScriptError("inject needs a frame")
            if rule.into_run is not None and rule.action != "replay":
                raise ScriptError("into_run only applies to replay")
            if not 0 < rule.mask < 256:
                raise ScriptError("corrupt mask must be a nonzero byte")
        if self.forge_k is not None and self.forge_k < 1:
            raise ScriptError("forge_k must be positive")


# -- reporting --------------------------------------------------------------


@dataclass
class KnowledgeLedger:
    """What the adversary has seen: frames on the wire and compromised state."""

    frames: int = 0
    frame_bytes: int = 0
    tables: set[tuple[str, str]] = field(default_factory=set)
    shares: dict[bytes, dict[int, bytes]] = field(default_factory=dict)

    def observe(self, frame: bytes) -> None:
        self.frames += 1
        self.frame_bytes += len(frame)

    def learn_share(self, key_id: bytes, x: int, data: bytes) -> None:
        self.shares.setdefault(key_id, {})[x] = data

    def recover(self, key_id: bytes, params: SchemeParams) -> bytes | None:
        """The key the adversary can compute from held shares, if any."""
        known = self.shares.get(key_id, {})
        if len(known) < params.k:
            return None
        shares = [Share(x, d) for x, d in sorted(known.items())]
        return reconstruct(params, shares).key


@dataclass
class RunOutcome:
    run: int
    alice: AgreedKey
    bob: AgreedKey
    leaked: bool = False
    identity: bytes | None = None
    excluded: tuple[str, ...] = ()
    bootstrap_use: dict[str, int] = field(default_factory=dict)

    @property
    def same_key(self) -> bool:
        return self.alice.agreed and self.bob.agreed and self.alice.key == self.bob.key

    @property
    def wrong_key(self) -> bool:
        return self.alice.agreed and self.bob.agreed and self.alice.key != self.bob.key

    @property
    def success(self) -> bool:
        return self.same_key


def _digest(data: bytes | None) -> str:
    return "-" if data is None else hashlib.sha256(data).hexdigest()[:16]


@dataclass
class RunReport:
    outcomes: list[RunOutcome]
    trace: list[str]
    ledger: KnowledgeLedger
    accounting: dict[str, int]
    diagnostics: list[str]
    request_bytes: dict[str, int] = field(default_factory=dict)

    @property
    def last(self) -> RunOutcome:
        return self.outcomes[-1]

    def lines(self) -> list[str]:
        out = list(self.trace)
        for o in self.outcomes:
            out.append(f"outcome run={o.run} A {o.alice.outcome()} {_digest(o.alice.key)}")
            out.append(f"outcome run={o.run} B {o.bob.outcome()} {_digest(o.bob.key)}")
            out.append(f"leaked run={o.run} {str(o.leaked).lower()}")
        for name, used in sorted(self.accounting.items()):
            out.append(f"table {name} used={used}")
        out.append(f"adversary frames={self.ledger.frames} bytes={self.ledger.frame_bytes}")
        return out

    def serialize(self) -> str:
        return "\n".join(self.lines()) + "\n"


# -- the network ------------------------------------------------------------


class SimNet:
    def __init__(
        self,
        topology: Topology,
        script: AdversaryScript,
        params: ProtocolParams,
        seed: int = 0,
        *,
        record: bool = True,
    ):
        script.validate(topology)
        if params.n > len(topology.hubs):
            raise ScriptError(f"n={params.n} exceeds the {len(topology.hubs)} hubs in the topology")
        self.topology = topology
        self.script = script
        self.params = params
        self.rng = random.Random(seed)
        self.record = record
        self.hubs = {name: Hub(name, request_cap=topology.request_cap) for name in topology.hubs}
        self.alice = Client("A", scheme=params.scheme, randbytes=self.rng.randbytes)
        self.bob = Client(
            "B",
            scheme=params.scheme,
            policy=ReceiverPolicy(k_min=params.kb, accepted_senders=frozenset([ident("A")])),
            randbytes=self.rng.randbytes,
        )
        table_seed = self.rng.getrandbits(64)
        for name, hub in self.hubs.items():
            for client in (self.alice, self.bob):
                hub_copy, client_copy = provision_pair(
                    name, client.client_id, topology.table_size, seed=table_seed
                )
                hub.register(client.client_id, hub_copy, record=b"id:" + client.client_id.rstrip(b"\0"))
                client.add_table(client_copy)
        self.ledger = KnowledgeLedger()
        for hub in script.compromised:
            self.ledger.tables |= {(hub, "A"), (hub, "B")}
        self.trace: list[str] = []
        self.diagnostics: list[str] = []
        self.request_bytes: Counter[str] = Counter()
        self._queue: deque[tuple[str, bytes]] = deque()
        self._held: list[tuple[str, bytes]] = []
        self._future: dict[int, list[tuple[str, bytes]]] = {}
        self._counts: Counter[str] = Counter()
        self._buffer: list[tuple[str, KeyRequest, bytes]] = []
        self._mail: dict[str, list[Any]] = {"A": [], "B": []}
        self._bob_policy: ReceiverPolicy | None = None
        self._run = 0
        self._step = 0

    # -- logging --------------------------------------------------------

    def _log(self, text: str) -> None:
        if self.record:
            self.trace.append(f"{self._run}.{self._step:04d} {text}")
        self._step += 1

    def _reject(self, where: str, exc: Exception) -> None:
        name = type(exc).__name__
        self.diagnostics.append(f"{where}:{name}")
        self._log(f"reject {where} {name}")

    # -- transport ------------------------------------------------------

    def send(self, link: str, frame: bytes) -> None:
        index = self._counts[link]
        self._counts[link] += 1
        self.ledger.observe(frame)
        if link.startswith("A->P"):
            self.request_bytes[link] += len(frame)
        rules = [r for r in self.script.rules if r.matches(self._run, link, index)]
        action = rules[0].action if rules else "deliver"
        self._log(f"{link} #{index} {action} len={len(frame)} {_digest(frame)}")
        if not rules:
            self._queue.append((link, frame))
            return
        rule = rules[0]
        if action == "deliver":
            self._queue.append((link, frame))
        elif action == "drop":
            pass
        elif action == "corrupt":
            raw = bytearray(frame)
            for p in rule.positions:
                if -len(raw) <= p < len(raw):
                    raw[p] ^= rule.mask
            self._queue.append((link, bytes(raw)))
        elif action == "replay":
            self._queue.append((link, frame))
            target = rule.to or link
            if rule.into_run is not None and rule.into_run != self._run:
                self._future.setdefault(rule.into_run, []).append((target, frame))
            else:
                self._queue.append((target, frame))
        elif action == "inject":
            self._queue.append((link, frame))
            self._queue.append((link, rule.frame))
        elif action == "reorder":
            self._held.append((link, frame))

    def _settle(self) -> None:
        while True:
            while self._queue:
                link, frame = self._queue.popleft()
                self._deliver(link, frame)
            if self._held:
                self._queue.extend(self._held)
                self._held.clear()
                continue
            if self._buffer:
                self._collude()
                continue
            return

    def _deliver(self, link: str, frame: bytes) -> None:
        src, dst = link.split("->")
        try:
            msg = decode(frame)
        except DskeError as exc:
            self._reject(dst, exc)
            return
        if dst in self.hubs:
            self._at_hub(dst, src, msg)
        elif dst == "B" and isinstance(msg, KeyInstruction):
            if msg.hub_id != ident(src):
                self._log(f"note {link} carries instruction from {ident_name(msg.hub_id)}")
            try:
                self.bob.receive_instruction(msg, self._bob_policy)
                self._log(f"accept B x={msg.x_coord} from {ident_name(msg.hub_id)}")
            except DskeError as exc:
                self._reject("B", exc)
        elif isinstance(msg, (Negotiation, Finalize)):
            self._mail[dst].append(msg)
        else:
            self._reject(dst, ScriptError(f"unexpected {type(msg).__name__}"))

    def _at_hub(self, name: str, src: str, msg: Any) -> None:
        hub = self.hubs[name]
        if not isinstance(msg, KeyRequest):
            self._reject(name, ScriptError(f"unexpected {type(msg).__name__}"))
            return
        behaviour = self.script.compromised.get(name)
        try:
            if behaviour is None:
                instruction = hub.handle_key_request(msg)
                self.send(f"{name}->B", encode(instruction))
                return
            share = hub.accept_request(msg)
        except DskeError as exc:
            self._reject(name, exc)
            return
        self.ledger.learn_share(msg.key_id, msg.x_coord, share)
        if behaviour in ("passive", "lie_identity"):
            self._forward(name, msg, share, msg.key_tag, msg.k)
        else:
            self._buffer.append((name, msg, share))

    def _forward(self, name: str, msg: KeyRequest, share: bytes, key_tag: bytes | None, k: int) -> None:
        try:
            instruction = self.hubs[name].build_instruction(
                receiver_id=msg.receiver_id,
                sender_id=msg.sender_id,
                key_id=msg.key_id,
                n=msg.n,
                k=k,
                x_coord=msg.x_coord,
                share=share,
                key_tag=key_tag,
            )
        except DskeError as exc:
            self._reject(name, exc)
            return
        self.send(f"{name}->B", encode(instruction))

    # -- compromised hubs -----------------------------------------------

    def _collude(self) -> None:
        buffered, self._buffer = self._buffer, []
        by_key: dict[bytes, list[tuple[str, KeyRequest, bytes]]] = {}
        for item in buffered:
            by_key.setdefault(item[1].key_id, []).append(item)
        for key_id, items in by_key.items():
            kinds = {b: [it for it in items if self.script.compromised[it[0]] == b] for b in BEHAVIOURS}
            for name, msg, _ in kinds["withhold"]:
                self._log(f"adversary {name} withholds x={msg.x_coord}")
            for name, msg, share in kinds["junk"]:
                self._log(f"adversary {name} sends junk x={msg.x_coord}")
                self._forward(name, msg, self.rng.randbytes(len(share)), msg.key_tag, msg.k)
            if kinds["forge_group"]:
                self._forge_group(kinds["forge_group"])
            if kinds["splice"]:
                self._splice(key_id, kinds["splice"])

    def _random_poly_shares(self, secret: bytes, anchors: dict[int, bytes], k: int, xs: Iterable[int]) -> dict[int, bytes]:
        """Evaluate a degree k-1 polynomial through (0, secret) and ``anchors`` at ``xs``."""
        points = {0: secret, **anchors}
        spare = (x for x in range(255, 0, -1) if x not in points and x not in xs)
        while len(points) < k:
            points[next(spare)] = self.rng.randbytes(len(secret))
        known = sorted(points)[:k]
        data = [np.frombuffer(points[x], np.uint8) for x in known]
        xs = list(xs)
        return {x: v.tobytes() for x, v in zip(xs, interpolate(GF256, known, data, xs))}

    def _forge_group(self, items: list[tuple[str, KeyRequest, bytes]]) -> None:
        length = len(items[0][2])
        k = self.script.forge_k or len(items)
        k = min(k, items[0][1].n)
        fake = self.rng.randbytes(length)
        key_tag = compute_tag(fake[:TAG_KEY_BYTES], fake[TAG_KEY_BYTES:])
        forged = self._random_poly_shares(fake, {}, k, [msg.x_coord for _, msg, _ in items])
        for name, msg, _ in items:
            self._log(f"adversary {name} forges x={msg.x_coord} k={k}")
            self._forward(name, msg, forged[msg.x_coord], key_tag, k)

    def _splice(self, key_id: bytes, items: list[tuple[str, KeyRequest, bytes]]) -> None:
        first = items[0][1]
        known = self.ledger.shares.get(key_id, {})
        if len(known) < first.k or first.key_tag is None:
            for name, msg, share in items:
                self._log(f"adversary {name} cannot splice, sends junk x={msg.x_coord}")
                self._forward(name, msg, self.rng.randbytes(len(share)), msg.key_tag, msg.k)
            return
        # a second secret valid under the genuine key tag: fresh S' and kappa',
        # beta' solved so that H_(kappa', beta')(S') equals the genuine tag
        altered_name, altered, share = items[0]
        length = len(share)
        s_new = self.rng.randbytes(length - TAG_KEY_BYTES)
        kappa = self.rng.randbytes(8)
        partial = compute_tag(kappa + bytes(8), s_new)
        beta = bytes(a ^ b for a, b in zip(partial, first.key_tag))
        fake = kappa + beta + s_new
        anchor_xs = [x for x in sorted(known) if x != altered.x_coord][: first.k - 1]
        anchors = {x: known[x] for x in anchor_xs}
        forged = self._random_poly_shares(fake, anchors, first.k, [altered.x_coord])
        self._log(f"adversary {altered_name} splices x={altered.x_coord} anchors={anchor_xs}")
        self._forward(altered_name, altered, forged[altered.x_coord], altered.key_tag, altered.k)
        for name, msg, share in items[1:]:
            self._forward(name, msg, share, msg.key_tag, msg.k)

    # -- identities -----------------------------------------------------

    def _identity_round(self) -> tuple[bytes | None, tuple[str, ...]]:
        net = self

        class Proxy:
            def __init__(self, name: str):
                self.name = name
                self.hub_id = ident(name)

            def handle_identity_query(self, query: IdentityQuery) -> IdentityResponse | None:
                frame = net._round_trip(f"A->{self.name}", encode(query))
                if frame is None:
                    return None
                msg = decode(frame)
                hub = net.hubs[self.name]
                if net.script.compromised.get(self.name) == "lie_identity":
                    resp = hub.identity_response(msg.querier_id, msg.subject_id, b"forged:" + msg.subject_id.rstrip(b"\0"))
                else:
                    resp = hub.handle_identity_query(msg)
                back = net._round_trip(f"{self.name}->A", encode(resp))
                return None if back is None else decode(back)

        hubs = [Proxy(name) for name in self.topology.hubs[: self.params.n]]
        try:
            record = self.alice.query_peer_identity(hubs, "B")
        except DskeError as exc:
            self._reject("A", exc)
            record = None
        excluded = tuple(sorted(ident_name(h) for h in self.alice.excluded_hubs))
        self._log(f"identity A->B record={record!r} excluded={list(excluded)}")
        return record, excluded

    def _round_trip(self, link: str, frame: bytes) -> bytes | None:
        # identity traffic is synchronous: the first surviving copy is used
        self.send(link, frame)
        out = None
        while self._queue or self._held:
            queued = list(self._queue) + self._held
            self._queue.clear()
            self._held.clear()
            for lnk, f in queued:
                if lnk == link and out is None:
                    out = f
                else:
                    self._deliver(lnk, f)
        return out

    # -- protocol drivers -------------------------------------------------

    def _general(self, m: int) -> tuple[AgreedKey, AgreedKey, bytes]:
        p = self.params
        hubs = list(self.topology.hubs[: p.n])
        requests, bundle = self.alice.initiate_key_agreement("B", p.scheme_params(), m, hubs)
        key_id = requests[0].key_id
        for hub, req in zip(hubs, requests):
            self.send(f"A->{hub}", encode(req))
        self._settle()
        bob = self.bob.reconstruct_and_validate(key_id)
        alice = self.alice.initiator_result(key_id)
        return alice, bob, key_id

    def _adapted(self) -> tuple[AgreedKey, AgreedKey, dict[str, int]]:
        p = self.params
        alice1, bob1, boot_id = self._general(TAG_KEY_BYTES * (p.n + 2))
        self._log(f"bootstrap A {alice1.outcome()} B {bob1.outcome()}")
        if not bob1.agreed:
            return AgreedKey.aborted(boot_id, AbortReason.NO_RESPONSE), bob1, {}
        boot_a = self.alice.adopt_bootstrap(boot_id)
        boot_b = self.bob.adopt_bootstrap(boot_id)
        requests = self.alice.initiate_adapted("B", boot_a, p.m)
        key_id = requests[0].key_id
        for req in requests:
            self.send(f"A->{ident_name(boot_a.hubs[req.x_coord])}", encode(req))
        self._bob_policy = self.bob.adapted_policy(boot_b)
        self._settle()
        self._bob_policy = None

        def usage() -> dict[str, int]:
            return {
                "A.by_A": boot_a.bytes_used_by("A"),
                "A.by_B": boot_a.bytes_used_by("B"),
                "B.by_A": boot_b.bytes_used_by("A"),
                "B.by_B": boot_b.bytes_used_by("B"),
            }

        negotiation = self.bob.adapted_negotiate(key_id, boot_b)
        if isinstance(negotiation, AgreedKey):
            return AgreedKey.aborted(key_id, AbortReason.NO_RESPONSE), negotiation, usage()
        self.send("B->A", encode(negotiation))
        self._settle()
        mail = [m for m in self._mail["A"] if isinstance(m, Negotiation) and m.key_id == key_id]
        self._mail["A"].clear()
        if not mail:
            return AgreedKey.aborted(key_id, AbortReason.NO_RESPONSE), AgreedKey.aborted(
                key_id, AbortReason.NO_RESPONSE
            ), usage()
        fin, alice = self.alice.adapted_finalize(mail[0], boot_a)
        if fin is None:
            return alice, AgreedKey.aborted(key_id, AbortReason.NO_RESPONSE), usage()
        self.send("A->B", encode(fin))
        self._settle()
        mail = [m for m in self._mail["B"] if isinstance(m, Finalize) and m.key_id == key_id]
        self._mail["B"].clear()
        if not mail:
            return alice, AgreedKey.aborted(key_id, AbortReason.NO_RESPONSE), usage()
        bob = self.bob.adapted_complete(mail[0], boot_b)
        return alice, bob, usage()

    def run_once(self) -> RunOutcome:
        self._step = 0
        self._counts.clear()
        for link, frame in self._future.pop(self._run, []):
            self._log(f"{link} inject captured len={len(frame)} {_digest(frame)}")
            self._queue.append((link, frame))
        identity, excluded = (None, ())
        if self.params.identity:
            identity, excluded = self._identity_round()
        usage: dict[str, int] = {}
        if self.params.adapted:
            alice, bob, usage = self._adapted()
            leaked = False
        else:
            alice, bob, key_id = self._general(self.params.m)
            learned = self.ledger.recover(key_id, self.params.scheme_params())
            leaked = learned is not None and learned == alice.key
        outcome = RunOutcome(self._run, alice, bob, leaked, identity, excluded, usage)
        self._log(f"end A {alice.outcome()} B {bob.outcome()}")
        self._run += 1
        return outcome

    def accounting(self) -> dict[str, int]:
        out = {}
        for name, hub in self.hubs.items():
            for cname, client in (("A", self.alice), ("B", self.bob)):
                out[f"{name}/{cname}@hub"] = sum(t.used_bytes for t in hub.tables(client.client_id))
                out[f"{name}/{cname}@client"] = client.table(name).used_bytes
        return out


def run_scenario(
    topology: Topology,
    script: AdversaryScript,
    params: ProtocolParams,
    seed: int = 0,
    *,
    runs: int = 1,
    record: bool = True,
) -> RunReport:
    net = SimNet(topology, script, params, seed, record=record)
    outcomes = [net.run_once() for _ in range(runs)]
    return RunReport(
        outcomes=outcomes,
        trace=net.trace,
        ledger=net.ledger,
        accounting=net.accounting(),
        diagnostics=net.diagnostics,
        request_bytes=dict(net.request_bytes),
    )


# -- canned strategies --------------------------------------------------------

STRATEGIES = ("drop", "corrupt", "forge")


def disruption_script(strategy: str, targets: Iterable[str], kb: int) -> AdversaryScript:
    """``drop``/``corrupt`` the hub->B links of ``targets``, or compromise them (``forge``)."""
    targets = list(targets)
    if strategy == "drop":
        return AdversaryScript(rules=[LinkRule(f"{h}->B", "drop") for h in targets])
    if strategy == "corrupt":
        # -41 is the last byte of the encrypted share in a tagged instruction
        return AdversaryScript(rules=[LinkRule(f"{h}->B", "corrupt", positions=(-41,)) for h in targets])
    if strategy == "forge":
        return AdversaryScript(compromised={h: "forge_group" for h in targets}, forge_k=kb)
    raise ScriptError(f"unknown strategy {strategy!r}")


def disruption_sweep(
    n: int, k: int, kb: int, *, strategies: Iterable[str] = STRATEGIES, m: int = 16, seed: int = 0
) -> list[tuple[int, bool]]:
    """For each disrupted-hub count d, whether every strategy still ends in agreement."""
    rng = random.Random(seed)
    topology = Topology.with_hubs(n, table_size=4 * (m + 2 * TAG_KEY_BYTES) + 64)
    params = ProtocolParams(n=n, k=k, kb=kb, m=m)
    rows = []
    for d in range(n + 1):
        targets = rng.sample(topology.hubs, d)
        ok = True
        for strategy in strategies:
            report = run_scenario(topology, disruption_script(strategy, targets, kb), params, rng.getrandbits(32), record=False)
            if report.last.wrong_key or not report.last.success:
                ok = False
        rows.append((d, ok))
    return rows


def boundary(rows: list[tuple[int, bool]]) -> int | None:
    """Smallest count at which agreement fails, if any."""
    for d, ok in rows:
        if not ok:
            return d
    return None
