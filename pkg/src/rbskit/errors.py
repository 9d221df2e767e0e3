"""Exception hierarchy shared across the toolkit."""


class RbsError(Exception):
    """Base class for all RBS parsing/writing errors."""


class UnknownSignatureError(RbsError):
    """First 8 bytes are not 'UTCRBES' followed by a known version digit."""


class InvalidFileTypeError(RbsError):
    """Header file-type field holds a code outside 0x00-0x03."""


class TruncatedError(RbsError):
    """Input ends before a complete header could be read."""


class InflateError(RbsError):
    """Compressed payload is not a decodable DEFLATE stream."""


class EmptyPayloadError(RbsError):
    """Operation requires a non-empty compressed payload."""


class NoValidJsonError(RbsError):
    """Decompressed text yielded zero parseable JSON values."""


class WrongEventNameError(RbsError):
    """Record passed to an extractor that does not handle its event name."""


class NoDataObjectError(RbsError):
    """Record carries no 'data' object to extract from."""


class NoDecodableFieldError(RbsError):
    """No configured data field decoded to a plausible boot-sector blob."""


class BatchTooLargeError(RbsError):
    """A single batch compresses to more than the file body can ever hold."""


class SiteNotFoundError(RbsError):
    """Corruption site selector does not resolve inside the fixture."""


class UnsupportedFormatError(RbsError):
    """Requested export format is not implemented."""
