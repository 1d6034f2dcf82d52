"""Exception hierarchy shared by all lvqkit modules."""


class LVQError(Exception):
    """Base class for every error raised by lvqkit."""


class DimensionMismatchError(LVQError, ValueError):
    pass


class DomainError(LVQError, ValueError):
    pass


class ParameterError(LVQError, ValueError):
    pass


class SearchSpaceTooLargeError(LVQError, ValueError):
    pass


class ConfigError(LVQError, ValueError):
    """Codec configuration incompatible with the input (e.g. divisibility)."""


class DecodeError(LVQError):
    """A bitstream could not be decoded."""


class FormatError(DecodeError):
    """Bad magic, unknown version or malformed header."""


class TruncatedStreamError(DecodeError):
    pass


class ChecksumError(DecodeError):
    pass
