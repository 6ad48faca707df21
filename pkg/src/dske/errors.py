"""Exception hierarchy shared by every layer of the protocol stack."""


class DskeError(Exception):
    """Base class for all protocol errors."""


# field arithmetic
class ZeroInverse(DskeError, ZeroDivisionError):
    pass


# secret sharing
class BadParams(DskeError, ValueError):
    pass


class DuplicateCoordinate(DskeError, ValueError):
    pass


class LengthMismatch(DskeError, ValueError):
    pass


class InsufficientShares(DskeError):
    pass


# pre-shared tables
class TableExhausted(DskeError):
    pass


class OverlapDetected(DskeError):
    pass


class OutOfBounds(DskeError, IndexError):
    pass


class BadMagic(DskeError):
    pass


class TruncatedFile(DskeError):
    pass


class IdMismatch(DskeError):
    pass


# wire codec
class Truncated(DskeError):
    pass


class UnknownMessageType(DskeError):
    pass


class FieldOverflow(DskeError, ValueError):
    pass


# hub / client message handling
class TagInvalid(DskeError):
    pass


class UnknownClient(DskeError):
    pass


class UnknownSubject(DskeError):
    pass


class RequestLimitExceeded(DskeError):
    """A per-peer request cap configured on a hub was hit."""


class HubNotAccepted(DskeError):
    pass


class SenderNotAccepted(DskeError):
    pass


class ParamsOutOfRange(DskeError):
    pass


class NoConsensus(DskeError):
    pass


# simulator
class ScriptError(DskeError, ValueError):
    pass
