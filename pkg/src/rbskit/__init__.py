"""rbskit — parse, verify, carve and timeline ring-buffered telemetry stores.

The stores (UTCRBES-signature .rbs files) hold compressed batches of JSON
telemetry records; this package reads them leniently, writes bit-exact
synthetic fixtures, carves them out of larger images and renders the records
into forensic timelines.
"""

from .catalog import EventCatalogEntry, corpus_stats, entries, lookup
from .carve import CarveConfidence, CarveExtraction, CarveHit
from .errors import (
    BatchTooLargeError,
    EmptyPayloadError,
    InflateError,
    InvalidFileTypeError,
    NoDataObjectError,
    NoDecodableFieldError,
    NoValidJsonError,
    RbsError,
    SiteNotFoundError,
    TruncatedError,
    UnknownSignatureError,
    UnsupportedFormatError,
    WrongEventNameError,
)
from .extract import (
    AppLifecycleEvent,
    BootSectorBlob,
    DiskInventory,
    ProcessExecutionEvent,
    extract_app_lifecycle,
    extract_boot_sector,
    extract_disk_inventory,
    extract_process_execution,
)
from .format import (
    CHUNK_HEADER_LEN,
    DataChunk,
    PropertyCategory,
    Provenance,
    RbsFileType,
    RbsHeader,
    RbsVersion,
    SizeEra,
    TelemetryRecord,
    TimelineEntry,
    canonical_filename,
    classify,
    expected_source,
    filetime_from_unix,
    filetime_to_iso,
    fixed_size_bytes,
    parse_header,
    parse_signature,
)
from .reader import (
    ChunkVerification,
    CrcMode,
    CrcModeSummary,
    ReadReport,
    ReadResult,
    ReadWarning,
    inflate_payload,
    iterate_chunks,
    read_file,
    split_records,
    verify_chunk,
)
from .scanner import BACKEND as SCANNER_BACKEND
from .timeline import build_timeline, export, merge_sort, normalize, parse_jsonl
from .writer import CorruptionSite, FixtureResult, WriterConfig, build_fixture, corrupt, write_fixture

__version__ = "0.1.0"
