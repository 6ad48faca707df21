"""Client state machines for both ends of a key agreement.

The initiator (A) draws one fresh run of table bytes per hub, fixes the
first k shares to those runs and derives the rest, so only the n - k derived
shares travel encrypted.  The receiver (B) collects the shares relayed by
the hubs, reconstructs, and accepts a key only if exactly one distinct
candidate secret carries a valid key tag.

The adapted variant first agrees a short bootstrap key of l(n+2) bytes with
the general protocol, then distributes pass-through shares without a key
tag and settles the usable subset in one round trip authenticated from the
bootstrap key.
"""

from __future__ import annotations

import enum
import itertools
import secrets
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    BadParams,
    DskeError,
    DuplicateCoordinate,
    HubNotAccepted,
    LengthMismatch,
    NoConsensus,
    OutOfBounds,
    OverlapDetected,
    ParamsOutOfRange,
    SenderNotAccepted,
    TableExhausted,
    TagInvalid,
    UnknownMessageType,
)
from .hub import xor_bytes
from .psk import PskTable, ident, ident_name
from .sharing import SchemeKind, SchemeParams, SecretBundle, Share, complete_shares, derive_other_shares, reconstruct
from .tags import TAG_KEY_BYTES, compute_tag, verify_tag
from .wire import (
    Finalize,
    IdentityQuery,
    IdentityResponse,
    KeyInstruction,
    KeyRequest,
    Negotiation,
    SliceRef,
    make_key_id,
    signed_bytes,
    with_tag,
)


class Status(str, enum.Enum):
    AGREED = "agreed"
    ABORTED = "aborted"


class AbortReason(str, enum.Enum):
    INSUFFICIENT_SHARES = "InsufficientShares"
    INJECTION_DETECTED = "InjectionDetected"
    NO_VALID_CANDIDATE = "NoValidCandidate"
    INSUFFICIENT_VALID_SHARES = "InsufficientValidShares"
    TAG_INVALID = "TagInvalid"
    LIST_MISMATCH = "ListMismatch"
    NO_RESPONSE = "NoResponse"


@dataclass(frozen=True)
class AgreedKey:
    key_id: bytes
    status: Status
    key: bytes | None = None
    contributors: tuple[int, ...] = ()
    reason: AbortReason | None = None

    @property
    def agreed(self) -> bool:
        return self.status is Status.AGREED

    @classmethod
    def aborted(cls, key_id: bytes, reason: AbortReason, contributors: Iterable[int] = ()) -> "AgreedKey":
        return cls(key_id, Status.ABORTED, None, tuple(contributors), reason)

    def outcome(self) -> str:
        return "agreed" if self.agreed else f"aborted({self.reason.value})"


@dataclass(frozen=True)
class ReceiverPolicy:
    """Receiver-side acceptance rules; ``None`` means "any"."""

    accepted_hubs: frozenset[bytes] | None = None
    k_min: int = 1
    n_min: int = 1
    n_max: int = 255
    accepted_senders: frozenset[bytes] | None = None

    def __post_init__(self) -> None:
        if self.k_min < 1:
            raise BadParams("k_B must be at least 1")
        if not 1 <= self.n_min <= self.n_max:
            raise BadParams("need 1 <= n_min <= n_max")
        for name in ("accepted_hubs", "accepted_senders"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, frozenset(ident(v) for v in value))

    def with_hubs(self, hubs: Iterable[bytes | str]) -> "ReceiverPolicy":
        return replace(self, accepted_hubs=frozenset(ident(h) for h in hubs))


class KeyStore:
    """Agreed keys by key id; each key can be fetched exactly once."""

    def __init__(self) -> None:
        self._keys: dict[bytes, bytes] = {}
        self._lock = threading.Lock()

    def put(self, key_id: bytes, key: bytes) -> None:
        with self._lock:
            if key_id in self._keys:
                raise ValueError("key id already stored")
            self._keys[key_id] = key

    def fetch(self, key_id: bytes) -> bytes:
        with self._lock:
            try:
                return self._keys.pop(key_id)
            except KeyError:
                raise KeyError("no such key, or it was already fetched") from None

    def __contains__(self, key_id: bytes) -> bool:
        return key_id in self._keys

    def __len__(self) -> int:
        return len(self._keys)


class BootstrapKey:
    """l(n+2) bytes of agreed key cut into single-use tag keys.

    Slot ``x - 1`` keys B's tag on the share with coordinate x, slot ``n``
    keys B's negotiation message and slot ``n + 1`` keys A's finalize
    message.  Each copy records which party generated a tag with each slot.
    """

    def __init__(self, key: bytes, hubs: dict[int, bytes], n: int, k: int, tag_key_len: int = TAG_KEY_BYTES):
        if len(key) != tag_key_len * (n + 2):
            raise LengthMismatch(f"bootstrap key must be {tag_key_len * (n + 2)} bytes, got {len(key)}")
        if any(not 1 <= x <= n for x in hubs):
            raise BadParams("hub coordinates must lie in 1..n")
        self.key = key
        self.hubs = dict(hubs)
        self.n = n
        self.k = k
        self.tag_key_len = tag_key_len
        self._owners: dict[int, str] = {}

    @property
    def negotiation_slot(self) -> int:
        return self.n

    @property
    def finalize_slot(self) -> int:
        return self.n + 1

    def slot_range(self, slot: int) -> tuple[int, int]:
        if not 0 <= slot < self.n + 2:
            raise OutOfBounds(f"bootstrap slot {slot} outside 0..{self.n + 1}")
        return slot * self.tag_key_len, (slot + 1) * self.tag_key_len

    def take(self, slot: int, owner: str) -> bytes:
        start, end = self.slot_range(slot)
        if slot in self._owners:
            raise OverlapDetected(f"bootstrap slot {slot} already used")
        self._owners[slot] = owner
        return self.key[start:end]

    def bytes_used_by(self, owner: str) -> int:
        return self.tag_key_len * sum(1 for o in self._owners.values() if o == owner)

    @property
    def bytes_used(self) -> int:
        return self.tag_key_len * len(self._owners)

    def x_of(self, hub_id: bytes) -> int | None:
        for x, h in self.hubs.items():
            if h == hub_id:
                return x
        return None


class IdentitySource(Protocol):
    hub_id: bytes

    def handle_identity_query(self, query: IdentityQuery) -> IdentityResponse | None: ...


@dataclass(frozen=True)
class _Received:
    hub_id: bytes
    sender_id: bytes
    x: int
    n: int
    k: int
    key_tag: bytes | None
    data: bytes


@dataclass
class _Outgoing:
    receiver_id: bytes
    hubs: list[bytes]
    params: SchemeParams
    shares: list[Share]
    bundle: SecretBundle | None = None


def _share_tag_message(key_id: bytes, x: int, share: bytes) -> bytes:
    return key_id + bytes([x]) + share


@dataclass
class Client:
    """One DSKE client; acts as initiator or receiver per key id."""

    client_id: bytes
    scheme: SchemeKind = SchemeKind.SHAMIR
    policy: ReceiverPolicy = field(default_factory=ReceiverPolicy)
    randbytes: Callable[[int], bytes] = secrets.token_bytes

    def __post_init__(self) -> None:
        self.client_id = ident(self.client_id)
        self.scheme = SchemeKind(self.scheme)
        self.keystore = KeyStore()
        self.excluded_hubs: set[bytes] = set()
        self.diagnostics: list[tuple[bytes, bytes, str]] = []
        self._tables: dict[bytes, list[PskTable]] = {}
        self._nonce = self.randbytes(16)
        self._counter = itertools.count()
        self._inbox: dict[bytes, dict[bytes, _Received]] = {}
        self._contributors: dict[bytes, tuple[dict[int, bytes], int, int]] = {}
        self._sent: dict[bytes, _Outgoing] = {}
        self._negotiated: dict[bytes, dict[int, bytes]] = {}
        self._lock = threading.Lock()
        self._key_locks: defaultdict[bytes, threading.Lock] = defaultdict(threading.Lock)

    def __repr__(self) -> str:
        return f"Client({ident_name(self.client_id)!r})"

    # -- tables ---------------------------------------------------------

    def add_table(self, table: PskTable) -> None:
        if table.client_id != self.client_id:
            raise ValueError("table belongs to another client")
        self._tables.setdefault(table.hub_id, []).append(table)

    @property
    def hub_ids(self) -> list[bytes]:
        return list(self._tables)

    def table(self, hub_id: bytes, table_id: int | None = None) -> PskTable:
        try:
            tables = self._tables[ident(hub_id)]
        except KeyError:
            raise HubNotAccepted(f"no table shared with hub {ident_name(ident(hub_id))!r}") from None
        if table_id is None:
            return tables[-1]
        for t in tables:
            if t.table_id == table_id:
                return t
        raise OutOfBounds(f"no table {table_id} shared with this hub")

    def params_for(self, n: int, k: int) -> SchemeParams:
        kind = SchemeKind.XOR if self.scheme is SchemeKind.XOR and k == n else SchemeKind.SHAMIR
        return SchemeParams(n, k, kind)

    def new_key_id(self) -> bytes:
        with self._lock:
            return make_key_id(self._nonce, next(self._counter))

    def _key_lock(self, key_id: bytes) -> threading.Lock:
        with self._lock:
            return self._key_locks[key_id]

    # -- initiator ------------------------------------------------------

    def _distribute(
        self,
        receiver_id: bytes,
        params: SchemeParams,
        m: int,
        hubs: Sequence[bytes | str],
        *,
        adapted: bool,
    ) -> tuple[bytes, list[KeyRequest], _Outgoing]:
        hubs = [ident(h) for h in hubs]
        if len(hubs) != params.n or len(set(hubs)) != len(hubs):
            raise BadParams(f"need {params.n} distinct hubs, got {len(hubs)}")
        if m < 1:
            raise BadParams("key length m must be at least one byte")
        length = m + TAG_KEY_BYTES
        tables = [self.table(h) for h in hubs]
        for t in tables:
            if t.unused_bytes < length + TAG_KEY_BYTES:
                raise TableExhausted(f"{t!r} cannot fund a {m}-byte key")
        key_id = self.new_key_id()
        pads = [t.allocate(length) for t in tables]
        if adapted:
            shares = [Share(i + 1, p.data) for i, p in enumerate(pads)]
            bundle, key_tag = None, None
        else:
            fixed = [Share(i + 1, pads[i].data) for i in range(params.k)]
            shares, bundle = complete_shares(params, fixed)
            key_tag = compute_tag(bundle.tag_key, bundle.key)
        requests = []
        for i, (hub_id, table, pad, share) in enumerate(zip(hubs, tables, pads, shares)):
            encrypted = None if adapted or i < params.k else xor_bytes(share.data, pad.data)
            tag_key = table.allocate(TAG_KEY_BYTES)
            msg = KeyRequest(
                sender_id=self.client_id,
                receiver_id=ident(receiver_id),
                key_id=key_id,
                n=params.n,
                k=params.k,
                x_coord=share.x,
                share_ref=SliceRef(pad.table_id, pad.start, pad.length),
                encrypted_share=encrypted,
                key_tag=key_tag,
                tag_ref=SliceRef(tag_key.table_id, tag_key.start, tag_key.length),
            )
            requests.append(with_tag(msg, compute_tag(tag_key.data, signed_bytes(msg))))
        out = _Outgoing(ident(receiver_id), hubs, params, shares, bundle)
        self._sent[key_id] = out
        return key_id, requests, out

    def initiate_key_agreement(
        self, receiver_id: bytes | str, params: SchemeParams, m: int, hubs: Sequence[bytes | str]
    ) -> tuple[list[KeyRequest], SecretBundle]:
        """Build one tagged request per hub; A's key goes to the keystore."""
        key_id, requests, out = self._distribute(ident(receiver_id), params, m, hubs, adapted=False)
        self.keystore.put(key_id, out.bundle.key)
        return requests, out.bundle

    def initiator_result(self, key_id: bytes) -> AgreedKey:
        out = self._sent[key_id]
        if out.bundle is None:
            raise KeyError("adapted agreements finish in adapted_finalize")
        return AgreedKey(key_id, Status.AGREED, out.bundle.key, tuple(s.x for s in out.shares))

    # -- receiver -------------------------------------------------------

    def receive_instruction(self, msg: KeyInstruction, policy: ReceiverPolicy | None = None) -> Share:
        """Validate and store one relayed share; raises a diagnostic on rejection."""
        try:
            return self._receive(msg, policy or self.policy)
        except DskeError as exc:
            key_id = getattr(msg, "key_id", b"")
            hub_id = getattr(msg, "hub_id", b"")
            self.diagnostics.append((key_id, hub_id, type(exc).__name__))
            raise

    def _receive(self, msg: KeyInstruction, policy: ReceiverPolicy) -> Share:
        if not isinstance(msg, KeyInstruction):
            raise UnknownMessageType(f"expected a key instruction, got {type(msg).__name__}")
        hub = msg.hub_id
        if (
            hub not in self._tables
            or hub in self.excluded_hubs
            or (policy.accepted_hubs is not None and hub not in policy.accepted_hubs)
        ):
            raise HubNotAccepted(f"hub {ident_name(hub)!r} is not accepted")
        if policy.accepted_senders is not None and msg.sender_id not in policy.accepted_senders:
            raise SenderNotAccepted(f"sender {ident_name(msg.sender_id)!r} is not accepted")
        if not (
            policy.k_min <= msg.k <= msg.n
            and policy.n_min <= msg.n <= policy.n_max
            and 1 <= msg.x_coord <= msg.n
            and len(msg.encrypted_share) >= TAG_KEY_BYTES
        ):
            raise ParamsOutOfRange(f"n={msg.n}, k={msg.k}, x={msg.x_coord} outside policy")
        with self._key_lock(msg.key_id):
            pad = self.table(hub, msg.share_ref.table_id).claim_range(msg.share_ref.start, msg.share_ref.length)
            tag_key = self.table(hub, msg.tag_ref.table_id).claim_range(msg.tag_ref.start, msg.tag_ref.length)
            if tag_key.length != TAG_KEY_BYTES or not verify_tag(tag_key.data, signed_bytes(msg), msg.message_tag):
                raise TagInvalid("key instruction failed authentication")
            inbox = self._inbox.setdefault(msg.key_id, {})
            if hub in inbox:
                raise DuplicateCoordinate("hub already delivered a share for this key id")
            data = xor_bytes(msg.encrypted_share, pad.data)
            inbox[hub] = _Received(hub, msg.sender_id, msg.x_coord, msg.n, msg.k, msg.key_tag, data)
            return Share(msg.x_coord, data)

    def received_count(self, key_id: bytes) -> int:
        return len(self._inbox.get(key_id, {}))

    def reconstruct_and_validate(self, key_id: bytes, policy: ReceiverPolicy | None = None) -> AgreedKey:
        """Settle a key id from the collected shares (general protocol)."""
        with self._key_lock(key_id):
            entries = list(self._inbox.pop(key_id, {}).values())
        groups: defaultdict[tuple, list[_Received]] = defaultdict(list)
        for e in entries:
            groups[(e.sender_id, e.n, e.k, e.key_tag, len(e.data))].append(e)
        enough = False
        found: dict[bytes, set[_Received]] = {}
        for (_, n, k, key_tag, _), group in groups.items():
            if len({e.x for e in group}) < k:
                continue
            enough = True
            if key_tag is None:
                continue
            for secret, support in self._candidates(self.params_for(n, k), group, key_tag).items():
                found.setdefault(secret, set()).update(support)
        if not enough:
            return AgreedKey.aborted(key_id, AbortReason.INSUFFICIENT_SHARES, sorted({e.x for e in entries}))
        if not found:
            return AgreedKey.aborted(key_id, AbortReason.NO_VALID_CANDIDATE)
        if len(found) > 1:
            return AgreedKey.aborted(key_id, AbortReason.INJECTION_DETECTED)
        ((secret, support),) = found.items()
        bundle = SecretBundle(secret)
        sample = next(iter(support))
        self._contributors[key_id] = ({e.x: e.hub_id for e in support}, sample.n, sample.k)
        self.keystore.put(key_id, bundle.key)
        return AgreedKey(key_id, Status.AGREED, bundle.key, tuple(sorted({e.x for e in support})))

    @staticmethod
    def _candidates(params: SchemeParams, group: list[_Received], key_tag: bytes) -> dict[bytes, set[_Received]]:
        """Distinct tag-valid secrets and the received shares supporting each."""
        group = sorted(group, key=lambda e: (e.x, e.hub_id))
        base: list[_Received] = []
        for e in group:
            if len(base) < params.k and all(b.x != e.x for b in base):
                base.append(e)
        others = [e for e in group if e not in base]
        base_shares = [Share(e.x, e.data) for e in base]

        def check(bundle: SecretBundle) -> bool:
            return verify_tag(bundle.tag_key, bundle.key, key_tag)

        bundle = reconstruct(params, base_shares)
        consistent = True
        if others:
            xs = sorted({e.x for e in others})
            predicted = {s.x: s.data for s in derive_other_shares(params, base_shares, xs)}
            consistent = all(predicted[e.x] == e.data for e in others)
        if consistent:
            return {bundle.secret: set(group)} if check(bundle) else {}

        found: dict[bytes, set[_Received]] = {}
        for subset in itertools.combinations(group, params.k):
            if len({e.x for e in subset}) < params.k:
                continue
            bundle = reconstruct(params, [Share(e.x, e.data) for e in subset])
            if check(bundle):
                found.setdefault(bundle.secret, set()).update(subset)
        return found

    # -- adapted protocol -----------------------------------------------

    def adopt_bootstrap(self, key_id: bytes) -> BootstrapKey:
        """Turn an agreed general-protocol key into a bootstrap key (consumes it)."""
        key = self.keystore.fetch(key_id)
        if key_id in self._sent:
            out = self._sent[key_id]
            hubs = {i + 1: h for i, h in enumerate(out.hubs)}
            n, k = out.params.n, out.params.k
        else:
            hubs, n, k = self._contributors[key_id]
        return BootstrapKey(key, hubs, n, k)

    def initiate_adapted(self, receiver_id: bytes | str, bootstrap: BootstrapKey, m: int) -> list[KeyRequest]:
        """Second pass: pass-through shares through the first-pass hubs, no key tag."""
        hubs = [bootstrap.hubs[x] for x in range(1, bootstrap.n + 1)]
        params = SchemeParams(bootstrap.n, bootstrap.k)
        _, requests, _ = self._distribute(ident(receiver_id), params, m, hubs, adapted=True)
        return requests

    def adapted_policy(self, bootstrap: BootstrapKey) -> ReceiverPolicy:
        return self.policy.with_hubs(bootstrap.hubs.values())

    def adapted_negotiate(self, key_id: bytes, bootstrap: BootstrapKey) -> Negotiation | AgreedKey:
        """B tags each usable share; returns an aborted key when too few arrived."""
        with self._key_lock(key_id):
            entries = list(self._inbox.pop(key_id, {}).values())
        usable = {}
        for e in entries:
            if e.key_tag is None and bootstrap.x_of(e.hub_id) == e.x and e.n == bootstrap.n:
                usable[e.x] = e.data
        if len(usable) < max(bootstrap.k, self.policy.k_min):
            return AgreedKey.aborted(key_id, AbortReason.INSUFFICIENT_VALID_SHARES, sorted(usable))
        share_tags = tuple(
            (x, compute_tag(bootstrap.take(x - 1, "B"), _share_tag_message(key_id, x, usable[x])))
            for x in sorted(usable)
        )
        msg = Negotiation(key_id=key_id, share_tags=share_tags)
        self._negotiated[key_id] = usable
        return with_tag(msg, compute_tag(bootstrap.take(bootstrap.negotiation_slot, "B"), signed_bytes(msg)))

    def adapted_finalize(self, msg: Negotiation, bootstrap: BootstrapKey) -> tuple[Finalize | None, AgreedKey]:
        """A checks B's share tags and settles the subset of shares to XOR."""
        out = self._sent.get(msg.key_id)
        if out is None or out.bundle is not None:
            raise KeyError("unknown adapted key id")
        mac_key = bootstrap.take(bootstrap.negotiation_slot, "B")
        if not verify_tag(mac_key, signed_bytes(msg), msg.message_tag):
            return None, AgreedKey.aborted(msg.key_id, AbortReason.TAG_INVALID)
        by_x = {s.x: s.data for s in out.shares}
        valid = []
        for x, tag in msg.share_tags:
            if x not in by_x or x in valid:
                continue
            if verify_tag(bootstrap.take(x - 1, "B"), _share_tag_message(msg.key_id, x, by_x[x]), tag):
                valid.append(x)
        if len(valid) < out.params.k:
            return None, AgreedKey.aborted(msg.key_id, AbortReason.INSUFFICIENT_VALID_SHARES, valid)
        valid.sort()
        bundle = _xor_bundle([by_x[x] for x in valid])
        fin = Finalize(key_id=msg.key_id, accepted=tuple(valid), key_tag=compute_tag(bundle.tag_key, bundle.key))
        fin = with_tag(fin, compute_tag(bootstrap.take(bootstrap.finalize_slot, "A"), signed_bytes(fin)))
        self.keystore.put(msg.key_id, bundle.key)
        return fin, AgreedKey(msg.key_id, Status.AGREED, bundle.key, tuple(valid))

    def adapted_complete(self, msg: Finalize, bootstrap: BootstrapKey) -> AgreedKey:
        """B validates A's list and key tag and settles the key."""
        mine = self._negotiated.pop(msg.key_id, None)
        if mine is None:
            raise KeyError("no negotiation pending for this key id")
        if not verify_tag(bootstrap.take(bootstrap.finalize_slot, "A"), signed_bytes(msg), msg.message_tag):
            return AgreedKey.aborted(msg.key_id, AbortReason.TAG_INVALID)
        listed = list(msg.accepted)
        if len(set(listed)) != len(listed) or not set(listed) <= set(mine):
            return AgreedKey.aborted(msg.key_id, AbortReason.LIST_MISMATCH, listed)
        if len(listed) < bootstrap.k:
            return AgreedKey.aborted(msg.key_id, AbortReason.INSUFFICIENT_VALID_SHARES, listed)
        bundle = _xor_bundle([mine[x] for x in sorted(listed)])
        if not verify_tag(bundle.tag_key, bundle.key, msg.key_tag):
            return AgreedKey.aborted(msg.key_id, AbortReason.NO_VALID_CANDIDATE, listed)
        self.keystore.put(msg.key_id, bundle.key)
        return AgreedKey(msg.key_id, Status.AGREED, bundle.key, tuple(sorted(listed)))

    # -- identities -----------------------------------------------------

    def identity_query(self, subject: bytes | str) -> IdentityQuery:
        return IdentityQuery(querier_id=self.client_id, subject_id=ident(subject))

    def check_identity_response(self, resp: object, hub_id: bytes, subject: bytes) -> bool:
        if not isinstance(resp, IdentityResponse):
            return False
        if resp.hub_id != hub_id or resp.querier_id != self.client_id or resp.subject_id != subject:
            return False
        try:
            tag_key = self.table(hub_id, resp.tag_ref.table_id).claim_range(resp.tag_ref.start, resp.tag_ref.length)
        except DskeError:
            return False
        return tag_key.length == TAG_KEY_BYTES and verify_tag(tag_key.data, signed_bytes(resp), resp.message_tag)

    def query_peer_identity(self, hubs: Iterable[IdentitySource], subject: bytes | str) -> bytes:
        """Ask every hub for ``subject``'s record and keep the strict-majority answer."""
        subject = ident(subject)
        answers: dict[bytes, bytes] = {}
        for hub in hubs:
            if hub.hub_id in self.excluded_hubs:
                continue
            try:
                resp = hub.handle_identity_query(self.identity_query(subject))
            except DskeError:
                continue
            if self.check_identity_response(resp, hub.hub_id, subject):
                answers[hub.hub_id] = resp.record
        if not answers:
            raise NoConsensus("no hub returned a valid identity response")
        record, votes = Counter(answers.values()).most_common(1)[0]
        if 2 * votes <= len(answers):
            raise NoConsensus(f"no strict majority among {len(answers)} responses")
        self.excluded_hubs.update(h for h, r in answers.items() if r != record)
        return record


def _xor_bundle(shares: Sequence[bytes]) -> SecretBundle:
    acc = np.frombuffer(shares[0], np.uint8).copy()
    for s in shares[1:]:
        acc ^= np.frombuffer(s, np.uint8)
    return SecretBundle(acc.tobytes())
