"""Decoder for ring-buffered telemetry stores.

Reading is forgiving by design: anything below the file header is evidence,
not a contract, so per-chunk problems become warnings or failed-chunk counts
instead of exceptions. Only an unusable header (wrong signature, bad type
code, short file) aborts a read.

The walk happens in two phases. A sequential pass follows the chunk chain
from the end of the header until padding, end of file, or an implausible
frame. If that pass stopped early — which is exactly what happens once the
ring buffer has wrapped and the oldest chunk has been partially overwritten —
a scavenging pass scans the remaining bytes for chunk headers it can *prove*
(CRC over the compressed or decompressed payload must match) and folds the
survivors back in. Records are then ordered by chunk index, which restores
write order across the wrap seam.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
import os
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterator, Union

from .errors import EmptyPayloadError, InflateError, NoValidJsonError
from .format import (
    CHUNK_HEADER_LEN,
    DataChunk,
    Provenance,
    RbsHeader,
    TelemetryRecord,
    filetime_year,
    parse_chunk_header,
    parse_header,
)
from .scanner import scan_json_boundaries

log = logging.getLogger(__name__)

# Warning kinds; stable strings so callers can filter without importing enums.
WARN_CURSOR_MISMATCH = "cursor-mismatch"
WARN_CURSOR_RANGE = "cursor-out-of-range"
WARN_TIMESTAMP = "implausible-timestamp"
WARN_CRC_MISMATCH = "crc-mismatch"
WARN_CHUNK_TORN = "chunk-torn"
WARN_IMPLAUSIBLE_SIZES = "implausible-sizes"
WARN_TRUNCATED = "chunk-truncated"
WARN_COUNT_MISMATCH = "count-mismatch"
WARN_BAD_UTF8 = "invalid-utf8"
WARN_RECORD_SHAPE = "record-shape"
WARN_RECORD_JUNK = "record-junk"
WARN_NO_JSON = "no-valid-json"
WARN_SCAVENGED = "chunk-scavenged"
WARN_DUPLICATE_INDEX = "duplicate-chunk-index"
WARN_EMPTY_PAYLOAD = "empty-payload"

_WHITESPACE = b" \t\r\n"

Source = Union[str, "os.PathLike[str]", bytes, bytearray, memoryview, BinaryIO]


@dataclass(frozen=True)
class ReadWarning:
    """One non-fatal observation made while reading."""

    offset: int | None
    kind: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        where = f"@0x{self.offset:x} " if self.offset is not None else ""
        return f"{where}{self.kind}: {self.message}"


@dataclass(frozen=True)
class ChunkIssue:
    """A structural stop raised by the sequential chunk walk."""

    offset: int
    kind: str
    message: str


class CrcMode(Enum):
    """What the stored chunk CRC turned out to cover."""

    OVER_COMPRESSED = "OverCompressed"
    OVER_DECOMPRESSED = "OverDecompressed"
    NEITHER = "Neither"


class CrcModeSummary(Enum):
    """File-level aggregate of per-chunk CRC modes."""

    OVER_COMPRESSED = "OverCompressed"
    OVER_DECOMPRESSED = "OverDecompressed"
    MIXED = "Mixed"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ChunkVerification:
    ok: bool
    mode: CrcMode
    inflate_ok: bool | None  # None when there was no payload to inflate


@dataclass
class ReadReport:
    """Everything read_file learned besides the records themselves."""

    source: str
    header: RbsHeader
    chunks_ok: int = 0
    chunks_failed: int = 0
    records: int = 0
    warnings: list[ReadWarning] = field(default_factory=list)
    crc_mode_observed: CrcModeSummary = CrcModeSummary.UNDETERMINED
    torn_chunks: list[DataChunk] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.warnings and self.chunks_failed == 0


@dataclass
class ReadResult:
    records: list[TelemetryRecord]
    report: ReadReport

    def __iter__(self) -> Iterator[TelemetryRecord]:
        return iter(self.records)


def _inflate_bytes(payload: bytes) -> bytes:
    """DEFLATE-decompress, trying a raw stream first, then a zlib wrapper.

    Requires a *complete* stream: a payload that runs out mid-stream raises
    InflateError so torn chunks are not silently half-decoded.
    """
    last_error: Exception | None = None
    for wbits in (-zlib.MAX_WBITS, zlib.MAX_WBITS):
        d = zlib.decompressobj(wbits)
        try:
            out = d.decompress(payload)
            out += d.flush()
        except zlib.error as exc:
            last_error = exc
            continue
        if not d.eof:
            last_error = zlib.error("incomplete DEFLATE stream")
            continue
        return out
    raise InflateError(f"payload is not a DEFLATE stream: {last_error}")


def verify_chunk(chunk: DataChunk) -> ChunkVerification:
    """Check the stored CRC-32, reporting which byte range it covers.

    Rather than assuming the CRC is over the compressed payload, both
    interpretations are tested; different store generations differ and the
    measurement is itself useful evidence.
    """
    comp_match = (zlib.crc32(chunk.deflate_payload) & 0xFFFFFFFF) == chunk.crc32
    inflated: bytes | None = None
    inflate_ok: bool | None = None
    if chunk.deflate_payload:
        try:
            inflated = _inflate_bytes(chunk.deflate_payload)
            inflate_ok = True
        except InflateError:
            inflate_ok = False
    if comp_match:
        mode = CrcMode.OVER_COMPRESSED
    elif inflated is not None and (zlib.crc32(inflated) & 0xFFFFFFFF) == chunk.crc32:
        mode = CrcMode.OVER_DECOMPRESSED
    else:
        mode = CrcMode.NEITHER
    return ChunkVerification(ok=mode is not CrcMode.NEITHER, mode=mode, inflate_ok=inflate_ok)


def _decode_utf8(raw: bytes) -> tuple[str, bool]:
    try:
        return raw.decode("utf-8"), False
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace"), True


def inflate_payload(chunk: DataChunk) -> str:
    """Decompress a chunk's DEFLATE section to text.

    Raises EmptyPayloadError when there is nothing to decompress and
    InflateError when the bytes are not a DEFLATE stream. Invalid UTF-8 is
    replaced rather than fatal (logged; the JSON inside is usually still
    salvageable).
    """
    if not chunk.deflate_payload:
        raise EmptyPayloadError("chunk has no compressed payload")
    text, bad = _decode_utf8(_inflate_bytes(chunk.deflate_payload))
    if bad:
        log.warning("chunk %d: invalid UTF-8 replaced during decode", chunk.chunk_index)
    return text


def _junk_offset(data: bytes, spans: list[tuple[int, int]]) -> int | None:
    """First offset of a non-whitespace byte outside all spans, if any."""
    pos = 0
    for s, e in spans:
        gap = data[pos:s]
        kept = len(gap) - len(gap.lstrip(_WHITESPACE))
        if kept < len(gap):
            return pos + kept
        pos = e
    gap = data[pos:]
    kept = len(gap) - len(gap.lstrip(_WHITESPACE))
    if kept < len(gap):
        return pos + kept
    return None


def _split_record_bytes(
    data: bytes, expected_count: int
) -> tuple[list[TelemetryRecord], list[ReadWarning]]:
    warnings: list[ReadWarning] = []
    spans = scan_json_boundaries(data)
    records: list[TelemetryRecord] = []
    for start, end in spans:
        try:
            value = json.loads(data[start:end])
        except ValueError:
            warnings.append(
                ReadWarning(start, WARN_RECORD_SHAPE, "balanced span is not valid JSON")
            )
            continue
        if not isinstance(value, dict):
            warnings.append(
                ReadWarning(start, WARN_RECORD_SHAPE, "top-level JSON value is not an object")
            )
            continue
        name = value.get("name")
        if not isinstance(name, str) or not name:
            warnings.append(
                ReadWarning(start, WARN_RECORD_SHAPE, "record lacks a non-empty 'name'")
            )
            continue
        records.append(TelemetryRecord(raw=value))
    junk_at = _junk_offset(data, spans)
    if junk_at is not None:
        warnings.append(
            ReadWarning(junk_at, WARN_RECORD_JUNK, "non-JSON bytes between records")
        )
    if not records:
        raise NoValidJsonError("no JSON records recovered from payload")
    if len(records) != expected_count:
        warnings.append(
            ReadWarning(
                None,
                WARN_COUNT_MISMATCH,
                f"chunk declares {expected_count} records, recovered {len(records)}",
            )
        )
    return records, warnings


def split_records(
    text: str, expected_count: int
) -> tuple[list[TelemetryRecord], list[ReadWarning]]:
    """Split decompressed payload text into telemetry records.

    Records are back-to-back JSON objects (writers differ on separators, so
    none is assumed). Values that are not objects, or objects without a
    usable "name", are skipped with a warning; a count disagreement with the
    chunk header is a warning, not an error. Raises NoValidJsonError when
    nothing in the text parses.
    """
    if not text:
        raise NoValidJsonError("payload text is empty")
    return _split_record_bytes(text.encode("utf-8"), expected_count)


def iterate_chunks(data: bytes, header: RbsHeader) -> Iterator[DataChunk | ChunkIssue]:
    """Walk the chunk chain sequentially from the end of the header.

    Yields DataChunk for every frame that fits, and a final ChunkIssue when
    the walk stops on something other than padding or a clean end of file.
    Each step consumes at least a chunk header's worth of bytes, so the walk
    terminates on any input.
    """
    size = len(data)
    body_capacity = size - header.header_len - CHUNK_HEADER_LEN
    pos = header.header_len
    while pos + CHUNK_HEADER_LEN <= size:
        window = data[pos : pos + CHUNK_HEADER_LEN]
        if not any(window):
            return  # zero padding: the write frontier
        crc, index, b64_size, defl_size, count, reserved = parse_chunk_header(data, pos)
        declared = b64_size + defl_size
        if declared > body_capacity:
            yield ChunkIssue(
                pos,
                WARN_IMPLAUSIBLE_SIZES,
                f"chunk sizes {b64_size}+{defl_size} exceed body capacity {body_capacity}",
            )
            return
        end = pos + CHUNK_HEADER_LEN + declared
        if end > size:
            yield ChunkIssue(
                pos,
                WARN_TRUNCATED,
                f"chunk at 0x{pos:x} claims {declared} payload bytes but only "
                f"{size - pos - CHUNK_HEADER_LEN} remain",
            )
            return
        yield DataChunk(
            crc32=crc,
            chunk_index=index,
            base64_size=b64_size,
            deflate_size=defl_size,
            record_count=count,
            reserved=reserved,
            base64_payload=bytes(data[pos + CHUNK_HEADER_LEN : pos + CHUNK_HEADER_LEN + b64_size]),
            deflate_payload=bytes(data[pos + CHUNK_HEADER_LEN + b64_size : end]),
            file_offset=pos,
        )
        pos = end
    if pos < size and any(data[pos:]):
        yield ChunkIssue(pos, WARN_TRUNCATED, "trailing bytes too short for a chunk header")


def _next_nonzero(data: bytes, pos: int) -> int | None:
    stripped = len(data) - len(data[pos:].lstrip(b"\x00")) if data[pos:] else len(data)
    return stripped if stripped < len(data) else None


def _scavenge_chunks(
    data: bytes, start: int
) -> tuple[list[DataChunk], list[ReadWarning]]:
    """Hunt for provable chunks in a region the sequential walk gave up on.

    A candidate is accepted only when its stored CRC matches the compressed
    payload, or — failing that — the payload inflates completely and the CRC
    matches the decompressed bytes. Random garbage essentially never passes,
    so false positives are not a practical concern; false negatives (a chunk
    whose own CRC was corrupt) are deliberately left on the floor here since
    unproven frames in a scavenged region are indistinguishable from noise.
    """
    found: list[DataChunk] = []
    warnings: list[ReadWarning] = []
    n = len(data)
    pos = max(start, 0)
    while pos + CHUNK_HEADER_LEN <= n:
        window = data[pos : pos + CHUNK_HEADER_LEN]
        if not any(window):
            nz = _next_nonzero(data, pos)
            if nz is None:
                break
            pos = max(pos + 1, nz - CHUNK_HEADER_LEN + 1)
            continue
        crc, index, b64_size, defl_size, count, reserved = parse_chunk_header(data, pos)
        end = pos + CHUNK_HEADER_LEN + b64_size + defl_size
        if defl_size == 0 or end > n:
            pos += 1
            continue
        payload = data[pos + CHUNK_HEADER_LEN + b64_size : end]
        mode: CrcMode | None = None
        if (zlib.crc32(payload) & 0xFFFFFFFF) == crc:
            mode = CrcMode.OVER_COMPRESSED
        else:
            try:
                inflated = _inflate_bytes(payload)
            except InflateError:
                inflated = None
            if inflated is not None and (zlib.crc32(inflated) & 0xFFFFFFFF) == crc:
                mode = CrcMode.OVER_DECOMPRESSED
        if mode is None:
            pos += 1
            continue
        found.append(
            DataChunk(
                crc32=crc,
                chunk_index=index,
                base64_size=b64_size,
                deflate_size=defl_size,
                record_count=count,
                reserved=reserved,
                base64_payload=bytes(data[pos + CHUNK_HEADER_LEN : pos + CHUNK_HEADER_LEN + b64_size]),
                deflate_payload=bytes(payload),
                file_offset=pos,
            )
        )
        warnings.append(
            ReadWarning(
                pos,
                WARN_SCAVENGED,
                f"recovered chunk index {index} past the sequential stop",
            )
        )
        pos = end
    return found, warnings


def _read_source(source: Source) -> tuple[bytes, str]:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source), "<memory>"
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        return path.read_bytes(), str(path)
    if hasattr(source, "read"):
        data = source.read()
        name = getattr(source, "name", "<stream>")
        return data, str(name)
    raise TypeError(f"unsupported source type: {type(source).__name__}")


def _header_warnings(header: RbsHeader, size: int) -> list[ReadWarning]:
    warnings: list[ReadWarning] = []
    if header.cursor_mismatch:
        warnings.append(
            ReadWarning(
                0x10,
                WARN_CURSOR_MISMATCH,
                f"cursor copies disagree: offsets 0x{header.last_chunk_offset_1:x}/"
                f"0x{header.last_chunk_offset_2:x}, indices {header.last_chunk_index_1}/"
                f"{header.last_chunk_index_2}",
            )
        )
    for label, off in (("1", header.last_chunk_offset_1), ("2", header.last_chunk_offset_2)):
        if off and not (header.header_len <= off < max(size, header.header_len + 1)):
            warnings.append(
                ReadWarning(
                    0x10,
                    WARN_CURSOR_RANGE,
                    f"last-chunk offset copy {label} (0x{off:x}) lies outside the file body",
                )
            )
    year = filetime_year(header.last_modified)
    if not 1970 <= year <= 2262:
        warnings.append(
            ReadWarning(
                0x08,
                WARN_TIMESTAMP,
                f"header timestamp resolves to year {year}, outside the plausible range",
            )
        )
    return warnings


def read_file(source: Source, *, source_label: str | None = None) -> ReadResult:
    """Read a telemetry store end to end.

    Accepts a path, raw bytes, or a binary file object. Returns the decoded
    records (ordered by chunk index, i.e. write order) together with a
    ReadReport of chunk health, CRC coverage and every warning raised along
    the way. Only header-level problems raise; see the module docstring for
    the recovery strategy.
    """
    data, default_label = _read_source(source)
    label = source_label if source_label is not None else default_label
    header = parse_header(data)
    report = ReadReport(source=label, header=header)
    report.warnings.extend(_header_warnings(header, len(data)))

    chunks: list[DataChunk] = []
    failed: list[DataChunk] = []
    modes: list[CrcMode] = []
    stop_pos: int | None = None

    pos_after = header.header_len
    for item in iterate_chunks(data, header):
        if isinstance(item, ChunkIssue):
            report.warnings.append(ReadWarning(item.offset, item.kind, item.message))
            stop_pos = item.offset
            break
        verdict = verify_chunk(item)
        if verdict.ok:
            modes.append(verdict.mode)
            chunks.append(item)
        elif verdict.inflate_ok:
            # Frame and payload are coherent; only the integrity check fails.
            report.warnings.append(
                ReadWarning(
                    item.file_offset,
                    WARN_CRC_MISMATCH,
                    f"chunk index {item.chunk_index}: stored CRC matches neither payload form",
                )
            )
            failed.append(item)
        elif item.deflate_size == 0:
            # An empty chunk: nothing to verify the CRC against beyond b"".
            if item.crc32 == 0:
                chunks.append(item)
                modes.append(CrcMode.OVER_COMPRESSED)
            else:
                report.warnings.append(
                    ReadWarning(
                        item.file_offset,
                        WARN_EMPTY_PAYLOAD,
                        f"empty chunk index {item.chunk_index} with nonzero CRC",
                    )
                )
                failed.append(item)
        else:
            # Neither CRC form matches and the payload will not inflate: the
            # frame itself is suspect, so its size fields cannot be trusted
            # to find the next chunk. Fall back to scavenging.
            report.warnings.append(
                ReadWarning(
                    item.file_offset,
                    WARN_CHUNK_TORN,
                    f"chunk at 0x{item.file_offset:x} is torn; bytes kept for review",
                )
            )
            report.torn_chunks.append(item)
            failed.append(item)
            stop_pos = item.file_offset + 1
            break
        pos_after = item.file_offset + item.total_len

    if stop_pos is None:
        stop_pos = pos_after
    if stop_pos + CHUNK_HEADER_LEN <= len(data):
        scavenged, sw = _scavenge_chunks(data, stop_pos)
        report.warnings.extend(sw)
        for ch in scavenged:
            verdict = verify_chunk(ch)
            modes.append(verdict.mode)
            chunks.append(ch)

    # Restore write order across the wrap seam. Ties (which should not occur
    # in an intact store) keep file order and raise a warning.
    chunks.sort(key=lambda c: (c.chunk_index, c.file_offset))
    seen_indices: set[int] = set()
    records: list[TelemetryRecord] = []
    for ch in chunks:
        if ch.chunk_index in seen_indices:
            report.warnings.append(
                ReadWarning(
                    ch.file_offset,
                    WARN_DUPLICATE_INDEX,
                    f"chunk index {ch.chunk_index} appears more than once",
                )
            )
        seen_indices.add(ch.chunk_index)
        if ch.deflate_size == 0:
            report.chunks_ok += 1
            continue
        raw, bad_utf8 = _decode_utf8(_inflate_bytes(ch.deflate_payload))
        if bad_utf8:
            report.warnings.append(
                ReadWarning(
                    ch.file_offset,
                    WARN_BAD_UTF8,
                    f"chunk index {ch.chunk_index}: invalid UTF-8 replaced",
                )
            )
        try:
            recs, warns = _split_record_bytes(raw.encode("utf-8"), ch.record_count)
        except NoValidJsonError as exc:
            report.warnings.append(ReadWarning(ch.file_offset, WARN_NO_JSON, str(exc)))
            report.chunks_failed += 1
            continue
        report.warnings.extend(
            dataclasses.replace(w, offset=ch.file_offset) if w.offset is None else w
            for w in warns
        )
        report.chunks_ok += 1
        for i, rec in enumerate(recs):
            records.append(
                dataclasses.replace(
                    rec,
                    provenance=Provenance(
                        source_file=label,
                        file_type=header.file_type,
                        chunk_index=ch.chunk_index,
                        record_index=i,
                    ),
                )
            )

    report.chunks_failed += len(failed)
    report.records = len(records)
    ok_modes = {m for m in modes if m is not CrcMode.NEITHER}
    if not ok_modes:
        report.crc_mode_observed = CrcModeSummary.UNDETERMINED
    elif ok_modes == {CrcMode.OVER_COMPRESSED}:
        report.crc_mode_observed = CrcModeSummary.OVER_COMPRESSED
    elif ok_modes == {CrcMode.OVER_DECOMPRESSED}:
        report.crc_mode_observed = CrcModeSummary.OVER_DECOMPRESSED
    else:
        report.crc_mode_observed = CrcModeSummary.MIXED
    return ReadResult(records=records, report=report)
