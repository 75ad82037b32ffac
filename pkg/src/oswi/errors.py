"""Exception types raised across the package."""


class OSWIError(Exception):
    """Base class for all package errors."""


class DomainError(OSWIError, ValueError):
    """An argument lies outside the domain of a function."""


class InvalidGrid(OSWIError, ValueError):
    pass


class BracketFailure(OSWIError, RuntimeError):
    pass


class NoSuchR(OSWIError, RuntimeError):
    """Deterministic iteration never reached the requested level."""


class ZeroCoordinate(OSWIError, ValueError):
    pass


class EmptyInput(OSWIError, ValueError):
    pass


class ShapeMismatch(OSWIError, ValueError):
    pass


class BatchTooSmall(OSWIError, ValueError):
    pass


class DatasetError(OSWIError, IOError):
    """Base class for dataset I/O problems."""


class BadMagic(DatasetError):
    pass


class TruncatedFile(DatasetError):
    pass


class CountMismatch(DatasetError):
    pass


class TooLarge(OSWIError, ValueError):
    pass


class ChecksumMismatch(DatasetError):
    pass
