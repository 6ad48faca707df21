"""Distributed symmetric key exchange over pre-shared random tables."""

from .client import AbortReason, AgreedKey, BootstrapKey, Client, KeyStore, ReceiverPolicy, Status
from .errors import DskeError
from .hub import Hub
from .psk import PskTable, ident, read_pskm, write_pskm
from .sharing import SchemeKind, SchemeParams, SecretBundle, Share, complete_shares, reconstruct
from .tags import TAG_BYTES, TAG_KEY_BYTES, compute_tag, verify_tag

__all__ = [
    "AbortReason",
    "AgreedKey",
    "BootstrapKey",
    "Client",
    "DskeError",
    "Hub",
    "KeyStore",
    "PskTable",
    "ReceiverPolicy",
    "SchemeKind",
    "SchemeParams",
    "SecretBundle",
    "Share",
    "Status",
    "TAG_BYTES",
    "TAG_KEY_BYTES",
    "compute_tag",
    "complete_shares",
    "ident",
    "read_pskm",
    "reconstruct",
    "verify_tag",
    "write_pskm",
]
