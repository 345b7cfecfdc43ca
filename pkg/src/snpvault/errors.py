"""Exception hierarchy shared by every snpvault module."""


class SnpVaultError(Exception):
    """Base class for all errors raised by snpvault."""


# genomics
class InvalidNucleotide(SnpVaultError, ValueError):
    pass


class InvalidLength(SnpVaultError, ValueError):
    pass


class OutOfRange(SnpVaultError, ValueError):
    pass


class MalformedRow(SnpVaultError, ValueError):
    pass


class InvalidPhenotype(SnpVaultError, ValueError):
    pass


# index tree
class EmptyDataset(SnpVaultError, ValueError):
    pass


class DepthMismatch(SnpVaultError, ValueError):
    pass


class SidOutOfRange(SnpVaultError, ValueError):
    pass


class InvalidPredicate(SnpVaultError, ValueError):
    pass


# paillier
class InsufficientKeyBits(SnpVaultError, ValueError):
    pass


class MessageOutOfRange(SnpVaultError, ValueError):
    pass


class CiphertextOutOfRange(SnpVaultError, ValueError):
    pass


# secure comparison
class WidthOutOfRange(SnpVaultError, ValueError):
    pass


class InputLengthMismatch(SnpVaultError, ValueError):
    pass


class LengthMismatch(SnpVaultError, ValueError):
    pass


class MalformedGroupElement(SnpVaultError, ValueError):
    pass


class DecodeFailure(SnpVaultError):
    """Garbled evaluation produced a label outside the output decoding map."""


class DecryptionMismatch(SnpVaultError):
    """A masked value decrypted outside the range the mask width allows."""


# protocol / transport
class ProtocolError(SnpVaultError):
    """A peer sent an unexpected or malformed message."""


class SidBeyondDepth(ProtocolError, ValueError):
    pass


class ChannelFailure(SnpVaultError):
    pass


class ChannelClosed(ChannelFailure):
    pass


class FrameTooLarge(ChannelFailure, ValueError):
    pass


class UnknownType(ChannelFailure, ValueError):
    pass


class BindFailure(ChannelFailure):
    pass


class ConnectFailure(ChannelFailure):
    pass
