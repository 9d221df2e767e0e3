"""Domain types and byte-level layout of DiagTrack RBS telemetry files.

Everything in here is pure data and conversion logic: no I/O. Layout facts
(field offsets, signatures, per-version fixed sizes) are encoded as module
constants so the reader, writer and carver all share one source of truth.

All sizes in the grids below are KiB; files are fixed-size and zero-padded,
so a file on disk is always exactly ``fixed_size_bytes(...)`` long.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum, IntEnum
from typing import Any, Iterator, Mapping

from .errors import InvalidFileTypeError, TruncatedError, UnknownSignatureError

SIGNATURE_PREFIX = b"UTCRBES"
SIGNATURE_LEN = 8

# File header layout. Versions 5+ append 11 reserved bytes; version 3 files
# are assumed to end the header at 0x2A (the reserved tail was introduced
# later). See README "Layout assumptions".
_HEADER_STRUCT_V3 = struct.Struct("<8sQIIIIIIH")
_HEADER_STRUCT_V5 = struct.Struct("<8sQIIIIIIH11s")
HEADER_LEN_V3 = _HEADER_STRUCT_V3.size  # 0x2A
HEADER_LEN_V5 = _HEADER_STRUCT_V5.size  # 0x35

# Data chunk header: crc32, chunk index, Base64 section size, DEFLATE section
# size, record count, 2 reserved bytes. Payload sections follow back to back.
_CHUNK_STRUCT = struct.Struct("<IIIII2s")
CHUNK_HEADER_LEN = _CHUNK_STRUCT.size  # 0x16

FILETIME_TICKS_PER_SECOND = 10_000_000
FILETIME_EPOCH = datetime(1601, 1, 1, tzinfo=timezone.utc)
# Seconds from the 1601 epoch to the Unix epoch.
FILETIME_UNIX_OFFSET_SECONDS = 11_644_473_600


class RbsVersion(Enum):
    """Format generation, identified by the digit after 'UTCRBES'."""

    V3 = "3"  # Windows 10 1507/1511 (legacy eventsNN.rbs naming)
    V5 = "5"  # 1607
    V7 = "7"  # 1703
    V8 = "8"  # 1709/1803 and later

    @property
    def signature(self) -> bytes:
        return SIGNATURE_PREFIX + self.value.encode("ascii")

    @property
    def header_len(self) -> int:
        return HEADER_LEN_V3 if self is RbsVersion.V3 else HEADER_LEN_V5

    @property
    def is_legacy(self) -> bool:
        return self is RbsVersion.V3


def parse_signature(raw: bytes) -> RbsVersion:
    """Decode an 8-byte signature, raising UnknownSignatureError otherwise."""
    if len(raw) < SIGNATURE_LEN:
        raise TruncatedError(f"signature needs {SIGNATURE_LEN} bytes, got {len(raw)}")
    sig = bytes(raw[:SIGNATURE_LEN])
    if sig[:7] != SIGNATURE_PREFIX:
        raise UnknownSignatureError(f"bad signature prefix {sig!r}")
    digit = sig[7:].decode("ascii", errors="replace")
    try:
        return RbsVersion(digit)
    except ValueError:
        raise UnknownSignatureError(f"unknown version digit {digit!r}") from None


class RbsFileType(IntEnum):
    """2-byte type code stored at header offset 0x28."""

    NORMAL = 0x00
    NORMAL_CRITICAL = 0x01
    COST_DEFERRED = 0x02
    REALTIME = 0x03


class SizeEra(Enum):
    """Which fixed-size grid applies.

    V3 files use one of two legacy grids (the second doubles the first) that
    cannot be told apart from the header alone; V5+ files share one grid.
    """

    LEGACY_1507 = "1507"
    LEGACY_1511 = "1511"
    MODERN = "modern"


# Fixed file sizes in KiB, keyed by era then type code.
_SIZE_GRID_KIB: dict[SizeEra, dict[RbsFileType, int]] = {
    SizeEra.LEGACY_1507: {
        RbsFileType.NORMAL: 24576,
        RbsFileType.NORMAL_CRITICAL: 6226,
        RbsFileType.COST_DEFERRED: 1475,
        RbsFileType.REALTIME: 492,
    },
    SizeEra.LEGACY_1511: {
        RbsFileType.NORMAL: 49152,
        RbsFileType.NORMAL_CRITICAL: 12452,
        RbsFileType.COST_DEFERRED: 2950,
        RbsFileType.REALTIME: 984,
    },
    SizeEra.MODERN: {
        RbsFileType.NORMAL: 16384,
        RbsFileType.NORMAL_CRITICAL: 6554,
        RbsFileType.COST_DEFERRED: 6554,
        RbsFileType.REALTIME: 3277,
    },
}

# Canonical on-disk names. The legacy scheme pairs type 0x02 with events11.rbs
# and 0x03 with events10.rbs; the type code is what the header stores, so it
# is authoritative over the numeric suffix.
_LEGACY_NAMES = {
    RbsFileType.NORMAL: "events00.rbs",
    RbsFileType.NORMAL_CRITICAL: "events01.rbs",
    RbsFileType.COST_DEFERRED: "events11.rbs",
    RbsFileType.REALTIME: "events10.rbs",
}
_MODERN_NAMES = {
    RbsFileType.NORMAL: "Events_Normal.rbs",
    RbsFileType.NORMAL_CRITICAL: "Events_NormalCritical.rbs",
    RbsFileType.COST_DEFERRED: "Events_CostDeferred.rbs",
    RbsFileType.REALTIME: "Events_Realtime.rbs",
}


def default_era(version: RbsVersion) -> SizeEra:
    """Era assumed when none is given.

    V3 defaults to the larger 1511 grid: over-carving a zero-padded tail is
    recoverable, under-carving loses chunks.
    """
    return SizeEra.LEGACY_1511 if version.is_legacy else SizeEra.MODERN


def fixed_size_bytes(
    version: RbsVersion,
    file_type: RbsFileType,
    era: SizeEra | None = None,
) -> int:
    """Fixed on-disk size in bytes for a (version, type) pair."""
    if era is None:
        era = default_era(version)
    if version.is_legacy != (era is not SizeEra.MODERN):
        raise ValueError(f"era {era.value} does not apply to {version.name}")
    return _SIZE_GRID_KIB[era][RbsFileType(file_type)] * 1024


def canonical_filename(version: RbsVersion, file_type: RbsFileType) -> str:
    names = _LEGACY_NAMES if version.is_legacy else _MODERN_NAMES
    return names[RbsFileType(file_type)]


@dataclass(frozen=True)
class RbsHeader:
    """Decoded file header.

    The two offset/index fields are duplicates in a healthy file; they have
    been observed to differ only when the writing service halted, so a
    mismatch is reported as a warning by readers, never an error.
    """

    signature_version: RbsVersion
    last_modified: int  # FILETIME ticks
    last_chunk_offset_1: int
    last_chunk_offset_2: int
    last_chunk_size: int
    total_chunk_size: int
    last_chunk_index_1: int
    last_chunk_index_2: int
    file_type: RbsFileType
    reserved: bytes = b""

    @property
    def header_len(self) -> int:
        return self.signature_version.header_len

    @property
    def cursor_mismatch(self) -> bool:
        return (
            self.last_chunk_offset_1 != self.last_chunk_offset_2
            or self.last_chunk_index_1 != self.last_chunk_index_2
        )

    def last_modified_iso(self) -> str:
        return filetime_to_iso(self.last_modified)

    def to_bytes(self) -> bytes:
        fields = (
            self.signature_version.signature,
            self.last_modified,
            self.last_chunk_offset_1,
            self.last_chunk_offset_2,
            self.last_chunk_size,
            self.total_chunk_size,
            self.last_chunk_index_1,
            self.last_chunk_index_2,
            int(self.file_type),
        )
        if self.signature_version.is_legacy:
            return _HEADER_STRUCT_V3.pack(*fields)
        return _HEADER_STRUCT_V5.pack(*fields, self.reserved.ljust(11, b"\x00")[:11])


def parse_header(raw: bytes) -> RbsHeader:
    """Decode a file header from the start of ``raw``.

    Raises UnknownSignatureError, InvalidFileTypeError or TruncatedError.
    """
    version = parse_signature(raw)
    if version.is_legacy:
        if len(raw) < HEADER_LEN_V3:
            raise TruncatedError(
                f"header needs {HEADER_LEN_V3} bytes, got {len(raw)}"
            )
        unpacked = _HEADER_STRUCT_V3.unpack_from(raw)
        reserved = b""
    else:
        if len(raw) < HEADER_LEN_V5:
            raise TruncatedError(
                f"header needs {HEADER_LEN_V5} bytes, got {len(raw)}"
            )
        *unpacked, reserved = _HEADER_STRUCT_V5.unpack_from(raw)
    (_, last_modified, off1, off2, size, total, idx1, idx2, type_code) = unpacked
    if type_code > 0x03:
        raise InvalidFileTypeError(f"file type code 0x{type_code:04x} out of range")
    return RbsHeader(
        signature_version=version,
        last_modified=last_modified,
        last_chunk_offset_1=off1,
        last_chunk_offset_2=off2,
        last_chunk_size=size,
        total_chunk_size=total,
        last_chunk_index_1=idx1,
        last_chunk_index_2=idx2,
        file_type=RbsFileType(type_code),
        reserved=bytes(reserved),
    )


@dataclass(frozen=True)
class DataChunk:
    """One data chunk: header fields plus its two payload sections.

    ``base64_payload`` is kept verbatim; its decoded content is opaque and is
    never interpreted. ``deflate_payload`` inflates to concatenated JSON
    telemetry records. ``file_offset`` records where the chunk header began.
    """

    crc32: int
    chunk_index: int
    base64_size: int
    deflate_size: int
    record_count: int
    reserved: bytes
    base64_payload: bytes
    deflate_payload: bytes
    file_offset: int

    @property
    def total_len(self) -> int:
        """Bytes this chunk occupies on disk, header included."""
        return CHUNK_HEADER_LEN + self.base64_size + self.deflate_size

    def header_bytes(self) -> bytes:
        return _CHUNK_STRUCT.pack(
            self.crc32,
            self.chunk_index,
            self.base64_size,
            self.deflate_size,
            self.record_count,
            self.reserved.ljust(2, b"\x00")[:2],
        )

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.base64_payload + self.deflate_payload


def parse_chunk_header(raw: bytes, offset: int = 0) -> tuple[int, int, int, int, int, bytes]:
    """Unpack the fixed chunk-header fields at ``offset``.

    Returns (crc32, chunk_index, base64_size, deflate_size, record_count,
    reserved). Raises TruncatedError if fewer than CHUNK_HEADER_LEN bytes
    remain.
    """
    if len(raw) - offset < CHUNK_HEADER_LEN:
        raise TruncatedError("chunk header truncated")
    return _CHUNK_STRUCT.unpack_from(raw, offset)


class PropertyCategory(Enum):
    """Forensic property a telemetry event name maps to."""

    OS_APP_LIFECYCLE = "OsAppLifecycle"
    HARDWARE_DEVICE = "HardwareDevice"
    PROCESS_EXECUTION = "ProcessExecution"
    BOOT_SECTOR_PARTITION = "BootSectorPartition"
    UNCLASSIFIED = "Unclassified"


# JSON keys promoted to named accessors on TelemetryRecord; everything else
# surfaces through extra_keys. 'ext' and 'data' stay opaque objects.
RECORD_KNOWN_KEYS = (
    "ver",
    "name",
    "time",
    "flags",
    "os",
    "osVer",
    "appId",
    "appVer",
    "ext",
    "data",
)


@dataclass(frozen=True)
class Provenance:
    """Where a record came from: file, chunk and in-chunk position."""

    source_file: str
    file_type: RbsFileType | None = None
    chunk_index: int | None = None
    record_index: int | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "source_file": self.source_file,
            "file_type": None if self.file_type is None else int(self.file_type),
            "chunk_index": self.chunk_index,
            "record_index": self.record_index,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping[str, Any]) -> "Provenance":
        ft = obj.get("file_type")
        return cls(
            source_file=obj.get("source_file", ""),
            file_type=None if ft is None else RbsFileType(ft),
            chunk_index=obj.get("chunk_index"),
            record_index=obj.get("record_index"),
        )

    def sort_key(self) -> tuple:
        return (
            self.source_file,
            self.chunk_index if self.chunk_index is not None else -1,
            self.record_index if self.record_index is not None else -1,
        )


@dataclass(frozen=True)
class TelemetryRecord:
    """One decoded telemetry event.

    The full original JSON object is retained in ``raw`` so that converting
    back to JSON is lossless; the named accessors are views into it. Absent
    keys read as None, exactly as they were absent in the source.
    """

    raw: Mapping[str, Any]
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        name = self.raw.get("name")
        if not isinstance(name, str) or not name:
            raise ValueError("telemetry record must carry a non-empty 'name'")

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def ver(self) -> Any:
        return self.raw.get("ver")

    @property
    def time(self) -> Any:
        return self.raw.get("time")

    @property
    def flags(self) -> Any:
        return self.raw.get("flags")

    @property
    def os(self) -> Any:
        return self.raw.get("os")

    @property
    def os_ver(self) -> Any:
        return self.raw.get("osVer")

    @property
    def app_id(self) -> Any:
        return self.raw.get("appId")

    @property
    def app_ver(self) -> Any:
        return self.raw.get("appVer")

    @property
    def ext(self) -> Any:
        return self.raw.get("ext")

    @property
    def data(self) -> Any:
        return self.raw.get("data")

    @property
    def extra_keys(self) -> dict[str, Any]:
        """Top-level keys beyond the standard set (e.g. 'epoch'), preserved."""
        return {k: v for k, v in self.raw.items() if k not in RECORD_KNOWN_KEYS}

    def to_json_dict(self) -> dict[str, Any]:
        return dict(self.raw)


@dataclass(frozen=True)
class TimelineEntry:
    """Normalized, sortable forensic event."""

    timestamp_utc: str | None
    event_name: str
    category: PropertyCategory
    summary: str
    detail: Mapping[str, Any] = field(default_factory=dict)
    provenance: Provenance | None = None
    time_parse_failed: bool = False


def classify(name: str) -> PropertyCategory:
    """Forensic category for an event name; unknown names are Unclassified."""
    from . import catalog

    entry = catalog.lookup(name)
    return entry.category if entry is not None else PropertyCategory.UNCLASSIFIED


def expected_source(name: str) -> RbsFileType | None:
    """File type a catalogued event is expected to live in, if known."""
    from . import catalog

    entry = catalog.lookup(name)
    return entry.expected_source if entry is not None else None


# Seconds from the 1601 epoch to the last instant datetime can represent;
# larger values switch to integer calendar arithmetic.
_MAX_DATETIME_SECONDS = int(
    (datetime(9999, 12, 31, 23, 59, 59, tzinfo=timezone.utc) - FILETIME_EPOCH).total_seconds()
)


def _civil_from_days(days_since_unix_epoch: int) -> tuple[int, int, int]:
    # Proleptic Gregorian date from a day count (Unix epoch day 0).
    z = days_since_unix_epoch + 719468
    era = z // 146097
    doe = z - era * 146097
    yoe = (doe - doe // 1460 + doe // 36524 - doe // 146096) // 365
    year = yoe + era * 400
    doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
    mp = (5 * doy + 2) // 153
    day = doy - (153 * mp + 2) // 5 + 1
    month = mp + 3 if mp < 10 else mp - 9
    if month <= 2:
        year += 1
    return year, month, day


def filetime_to_iso(ticks: int) -> str:
    """Render a 64-bit FILETIME (100 ns ticks since 1601-01-01 UTC) as ISO-8601.

    Total over the whole unsigned 64-bit range: values past year 9999 are
    formatted with a '+' and expanded year digits; callers decide
    plausibility. Sub-second precision is kept to 7 digits when nonzero.
    """
    if ticks < 0:
        raise ValueError("FILETIME ticks must be non-negative")
    seconds, frac = divmod(ticks, FILETIME_TICKS_PER_SECOND)
    if seconds <= _MAX_DATETIME_SECONDS:
        dt = FILETIME_EPOCH + timedelta(seconds=seconds)
        year, month, day = dt.year, dt.month, dt.day
        hour, minute, second = dt.hour, dt.minute, dt.second
    else:
        days, rem = divmod(seconds - FILETIME_UNIX_OFFSET_SECONDS, 86400)
        year, month, day = _civil_from_days(days)
        hour, rem = divmod(rem, 3600)
        minute, second = divmod(rem, 60)
    year_str = f"{year:04d}" if year <= 9999 else f"+{year}"
    frac_str = f".{frac:07d}" if frac else ""
    return (
        f"{year_str}-{month:02d}-{day:02d}"
        f"T{hour:02d}:{minute:02d}:{second:02d}{frac_str}Z"
    )


def filetime_from_unix(unix_seconds: float) -> int:
    """FILETIME ticks for a Unix timestamp."""
    return round((unix_seconds + FILETIME_UNIX_OFFSET_SECONDS) * FILETIME_TICKS_PER_SECOND)


def filetime_year(ticks: int) -> int:
    """Calendar year a FILETIME falls in (cheap plausibility checks)."""
    seconds = ticks // FILETIME_TICKS_PER_SECOND
    if seconds <= _MAX_DATETIME_SECONDS:
        return (FILETIME_EPOCH + timedelta(seconds=seconds)).year
    return _civil_from_days((seconds - FILETIME_UNIX_OFFSET_SECONDS) // 86400)[0]


def iter_versions() -> Iterator[RbsVersion]:
    return iter(RbsVersion)


def iter_file_types() -> Iterator[RbsFileType]:
    return iter(RbsFileType)
