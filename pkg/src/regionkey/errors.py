"""Exception hierarchy shared by every layer of the package."""


class RegionKeyError(Exception):
    """Base class for all errors raised by regionkey."""


# curve arithmetic

class CurveError(RegionKeyError):
    """Invalid curve parameters or an internal inconsistency in group arithmetic."""


class MalformedPointError(RegionKeyError):
    """A point that does not lie on the curve was supplied."""


class TableTooLargeError(RegionKeyError):
    """A brute-force discrete-log table was requested for a group that is too big."""


# key agreement

class DuplicateMemberError(RegionKeyError):
    pass


class NoSuchMemberError(RegionKeyError):
    pass


class StaleEpochError(RegionKeyError):
    """A rekey broadcast older than (or equal to) the receiver's epoch was offered."""


class NotAddressedError(RegionKeyError):
    """A rekey broadcast carries no partial key for the receiving member."""


class RoleError(RegionKeyError):
    """An operation was invoked on a member that does not hold the required role."""


class GroupDissolvedError(RegionKeyError):
    """The last member left; the group no longer exists."""


class DegenerateKeyError(RegionKeyError):
    """A tree node key evaluated to the point at infinity or to x = 0.

    The acting controller must refresh its scalar and retry.
    """


class IncompleteBroadcastError(RegionKeyError):
    """A tree broadcast lacks a blinded key on the receiver's co-path."""


# messaging

class UnencodableByteError(RegionKeyError):
    pass


class NotInSubgroupError(RegionKeyError):
    """A point is not a multiple of the base point."""


class DecryptionError(RegionKeyError):
    """Decryption produced a point that does not decode (wrong key or corrupt data)."""


# simulation / application

class KeyNotReadyError(RegionKeyError):
    pass


class UndeliverableError(RegionKeyError):
    pass


class ItemNotFoundError(RegionKeyError):
    pass


class ComparisonInvalidError(RegionKeyError):
    pass


class ScenarioParseError(RegionKeyError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno
