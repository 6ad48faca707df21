"""Security hub: relays one share per key agreement between two clients."""

from __future__ import annotations

import threading
from collections import Counter

import numpy as np

from .errors import OutOfBounds, RequestLimitExceeded, TagInvalid, UnknownClient, UnknownSubject
from .psk import PskTable, ident
from .tags import TAG_KEY_BYTES, compute_tag, verify_tag
from .wire import IdentityQuery, IdentityResponse, KeyInstruction, KeyRequest, SliceRef, signed_bytes, with_tag


def xor_bytes(a: bytes, b: bytes) -> bytes:
    return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()


class Hub:
    """Hub state: one table list per client plus an append-only identity registry.

    Invalid requests raise; callers (the network layer) drop the message and
    never answer the sender, since an error reply would be an unauthenticated
    oracle.
    """

    def __init__(self, hub_id: str | bytes, *, request_cap: int | None = None):
        self.hub_id = ident(hub_id)
        self.request_cap = request_cap
        self._tables: dict[bytes, list[PskTable]] = {}
        self._records: dict[bytes, bytes] = {}
        self._requests: Counter[tuple[bytes, bytes]] = Counter()
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"Hub({self.hub_id.rstrip(bytes(1)).decode()!r})"

    # -- registry -------------------------------------------------------

    def register(self, client_id: str | bytes, table: PskTable, record: bytes | None = None) -> None:
        cid = ident(client_id)
        if table.client_id != cid or table.hub_id != self.hub_id:
            raise ValueError("table does not belong to this hub/client pair")
        with self._lock:
            self._tables.setdefault(cid, []).append(table)
            if cid not in self._records:
                self._records[cid] = record if record is not None else cid

    def is_registered(self, client_id: bytes) -> bool:
        return client_id in self._tables

    def tables(self, client_id: bytes) -> list[PskTable]:
        try:
            return self._tables[client_id]
        except KeyError:
            raise UnknownClient(f"client {client_id!r} is not registered") from None

    def table(self, client_id: bytes, table_id: int | None = None) -> PskTable:
        tables = self.tables(client_id)
        if table_id is None:
            return tables[-1]
        for t in tables:
            if t.table_id == table_id:
                return t
        raise OutOfBounds(f"no table {table_id} for this client")

    def record_for(self, client_id: bytes) -> bytes:
        try:
            return self._records[client_id]
        except KeyError:
            raise UnknownSubject(f"no identity record for {client_id!r}") from None

    # -- key agreement --------------------------------------------------

    def accept_request(self, msg: KeyRequest) -> bytes:
        """Consume and authenticate A's request; return the plaintext share."""
        for cid in (msg.sender_id, msg.receiver_id):
            if not self.is_registered(cid):
                raise UnknownClient(f"client {cid!r} is not registered")
        pair = (msg.sender_id, msg.receiver_id)
        if self.request_cap is not None and self._requests[pair] >= self.request_cap:
            raise RequestLimitExceeded("per-peer request cap reached")
        share = self.table(msg.sender_id, msg.share_ref.table_id).claim_range(
            msg.share_ref.start, msg.share_ref.length
        )
        tag_key = self.table(msg.sender_id, msg.tag_ref.table_id).claim_range(
            msg.tag_ref.start, msg.tag_ref.length
        )
        if tag_key.length != TAG_KEY_BYTES or not verify_tag(tag_key.data, signed_bytes(msg), msg.message_tag):
            raise TagInvalid("key request failed authentication")
        with self._lock:
            self._requests[pair] += 1
        if msg.encrypted_share is None:
            return share.data
        return xor_bytes(msg.encrypted_share, share.data)

    def build_instruction(
        self,
        *,
        receiver_id: bytes,
        sender_id: bytes,
        key_id: bytes,
        n: int,
        k: int,
        x_coord: int,
        share: bytes,
        key_tag: bytes | None,
    ) -> KeyInstruction:
        """Encrypt ``share`` under fresh bytes of the receiver's table and tag it."""
        table = self.table(receiver_id)
        pad = table.allocate(len(share), from_end=True)
        tag_key = table.allocate(TAG_KEY_BYTES, from_end=True)
        msg = KeyInstruction(
            hub_id=self.hub_id,
            sender_id=sender_id,
            key_id=key_id,
            n=n,
            k=k,
            x_coord=x_coord,
            share_ref=SliceRef(pad.table_id, pad.start, pad.length),
            encrypted_share=xor_bytes(share, pad.data),
            key_tag=key_tag,
            tag_ref=SliceRef(tag_key.table_id, tag_key.start, tag_key.length),
        )
        return with_tag(msg, compute_tag(tag_key.data, signed_bytes(msg)))

    def handle_key_request(self, msg: KeyRequest) -> KeyInstruction:
        share = self.accept_request(msg)
        return self.build_instruction(
            receiver_id=msg.receiver_id,
            sender_id=msg.sender_id,
            key_id=msg.key_id,
            n=msg.n,
            k=msg.k,
            x_coord=msg.x_coord,
            share=share,
            key_tag=msg.key_tag,
        )

    # -- identities -----------------------------------------------------

    def handle_identity_query(self, query: IdentityQuery, querier: bytes | None = None) -> IdentityResponse:
        querier = query.querier_id if querier is None else ident(querier)
        return self.identity_response(querier, query.subject_id, self.record_for(query.subject_id))

    def identity_response(self, querier: bytes, subject: bytes, record: bytes) -> IdentityResponse:
        """Tag ``record`` for ``querier``; also used by scripted compromised hubs."""
        tag_key = self.table(querier).allocate(TAG_KEY_BYTES, from_end=True)
        msg = IdentityResponse(
            hub_id=self.hub_id,
            querier_id=querier,
            subject_id=subject,
            record=record,
            tag_ref=SliceRef(tag_key.table_id, tag_key.start, tag_key.length),
        )
        return with_tag(msg, compute_tag(tag_key.data, signed_bytes(msg)))
