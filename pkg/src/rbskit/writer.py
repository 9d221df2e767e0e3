"""Synthetic telemetry-store builder.

Produces byte-exact fixtures for tests and tool validation: a zero-filled
file of the nominal fixed size whose chunks are appended from the first byte
after the header and wrap back to that point when the end is reached,
overwriting the oldest data — the same ring discipline the real service
uses. Given the same config and batches the output is identical down to the
last byte (the header timestamp is the only wall-clock input, and it can be
pinned).
"""

from __future__ import annotations

import base64
import json
import random
import time
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence

from .errors import BatchTooLargeError, SiteNotFoundError
from .format import (
    CHUNK_HEADER_LEN,
    DataChunk,
    RbsFileType,
    RbsHeader,
    RbsVersion,
    SizeEra,
    filetime_from_unix,
    fixed_size_bytes,
    parse_header,
)
from .reader import iterate_chunks


@dataclass(frozen=True)
class WriterConfig:
    """Knobs for fixture generation; defaults give a modern realtime store."""

    version: RbsVersion = RbsVersion.V8
    file_type: RbsFileType = RbsFileType.REALTIME
    fixed_size_override: int | None = None
    era: SizeEra | None = None  # only meaningful for V3; None picks the default
    base64_blob_size: int = 256  # on-disk size of the opaque Base64 section
    start_chunk_index: int = 0
    timestamp_ticks: int | None = None  # None: wall clock at build time
    seed: int = 0
    newline_separated: bool = False  # separate records with '\n' instead of nothing

    def fixed_size(self) -> int:
        if self.fixed_size_override is not None:
            return self.fixed_size_override
        return fixed_size_bytes(self.version, self.file_type, era=self.era)


@dataclass(frozen=True)
class BatchPlacement:
    """Where one batch's chunk landed in the file."""

    batch_index: int
    chunk_index: int
    offset: int
    length: int
    record_count: int


@dataclass
class FixtureResult:
    """A built fixture plus enough geometry to reason about overwrites."""

    data: bytes
    config: WriterConfig
    placements: list[BatchPlacement] = field(default_factory=list)
    wrapped: bool = False

    @property
    def surviving(self) -> list[BatchPlacement]:
        """Placements whose bytes were never overwritten by a later batch.

        After a wrap this is a contiguous tail of the write sequence — the
        ring guarantees later writes clobber oldest-first.
        """
        out = []
        for i, p in enumerate(self.placements):
            span = range(p.offset, p.offset + p.length)
            alive = True
            for later in self.placements[i + 1 :]:
                if later.offset < span.stop and span.start < later.offset + later.length:
                    alive = False
                    break
            if alive:
                out.append(p)
        return out

    @property
    def surviving_batches(self) -> list[int]:
        return [p.batch_index for p in self.surviving]


def _encode_batch(records: Sequence[Mapping[str, Any]], newline_separated: bool) -> bytes:
    sep = "\n" if newline_separated else ""
    return sep.join(
        json.dumps(r, separators=(",", ":"), ensure_ascii=False) for r in records
    ).encode("utf-8")


def _base64_blob(rng: random.Random, on_disk_size: int) -> bytes:
    """An opaque but well-formed Base64 section of exactly the given size.

    Sizes are rounded down to a multiple of four (Base64 text comes in
    quads); the underlying byte count is jittered so padding '=' characters
    show up in some chunks and not others.
    """
    quads = on_disk_size // 4
    if quads == 0:
        return b""
    raw_len = 3 * quads - rng.choice((0, 1, 2))
    return base64.b64encode(rng.randbytes(raw_len))


def build_fixture(
    config: WriterConfig, batches: Sequence[Sequence[Mapping[str, Any]]]
) -> FixtureResult:
    """Build a complete store image from record batches (one chunk each).

    Raises BatchTooLargeError when a single encoded chunk cannot fit the
    body even alone. The header's cursor fields point at the last chunk
    written; total_chunk_size accumulates monotonically across the whole
    write history, wraps included, mirroring the append counter of the
    real writer.
    """
    size = config.fixed_size()
    header_len = config.version.header_len
    if size <= header_len + CHUNK_HEADER_LEN:
        raise BatchTooLargeError(f"fixed size {size} leaves no room for chunks")
    body = bytearray(size)
    rng = random.Random(config.seed)
    ticks = (
        config.timestamp_ticks
        if config.timestamp_ticks is not None
        else filetime_from_unix(time.time())
    )

    pos = header_len
    placements: list[BatchPlacement] = []
    wrapped = False
    last_offset = 0
    last_size = 0
    last_index = 0
    total = 0
    for batch_no, batch in enumerate(batches):
        chunk_index = config.start_chunk_index + batch_no
        payload = _encode_batch(batch, config.newline_separated)
        deflater = zlib.compressobj(6, zlib.DEFLATED, -zlib.MAX_WBITS)
        compressed = deflater.compress(payload) + deflater.flush()
        blob = _base64_blob(rng, config.base64_blob_size)
        chunk = DataChunk(
            crc32=zlib.crc32(compressed) & 0xFFFFFFFF,
            chunk_index=chunk_index,
            base64_size=len(blob),
            deflate_size=len(compressed),
            record_count=len(batch),
            reserved=b"\x00\x00",
            base64_payload=blob,
            deflate_payload=compressed,
            file_offset=0,
        )
        encoded = chunk.to_bytes()
        if header_len + len(encoded) > size:
            raise BatchTooLargeError(
                f"batch {batch_no}: chunk of {len(encoded)} bytes exceeds body capacity "
                f"{size - header_len}"
            )
        if pos + len(encoded) > size:
            pos = header_len
            wrapped = True
        body[pos : pos + len(encoded)] = encoded
        placements.append(
            BatchPlacement(
                batch_index=batch_no,
                chunk_index=chunk_index,
                offset=pos,
                length=len(encoded),
                record_count=len(batch),
            )
        )
        last_offset, last_size, last_index = pos, len(encoded), chunk_index
        total += len(encoded)
        pos += len(encoded)

    header = RbsHeader(
        signature_version=config.version,
        last_modified=ticks,
        last_chunk_offset_1=last_offset,
        last_chunk_offset_2=last_offset,
        last_chunk_size=last_size,
        total_chunk_size=total,
        last_chunk_index_1=last_index,
        last_chunk_index_2=last_index,
        file_type=config.file_type,
        reserved=b"\x00" * 11,
    )
    body[:header_len] = header.to_bytes()
    return FixtureResult(data=bytes(body), config=config, placements=placements, wrapped=wrapped)


def write_fixture(
    path, config: WriterConfig, batches: Sequence[Sequence[Mapping[str, Any]]]
) -> FixtureResult:
    """build_fixture, then write the image to ``path``."""
    result = build_fixture(config, batches)
    with open(path, "wb") as fh:
        fh.write(result.data)
    return result


class CorruptionSite(Enum):
    """Targets for deterministic damage injection."""

    SIGNATURE_BYTE = "SignatureByte"
    CRC_FIELD = "CrcField"
    SIZE_FIELD = "SizeField"
    PAYLOAD_BYTE_FLIP = "PayloadByteFlip"


def _nth_chunk(data: bytes, header: RbsHeader, n: int) -> DataChunk:
    count = 0
    for item in iterate_chunks(data, header):
        if isinstance(item, DataChunk):
            if count == n:
                return item
            count += 1
        else:
            break
    raise SiteNotFoundError(f"fixture has no chunk ordinal {n}")


def corrupt(
    fixture: bytes,
    site: CorruptionSite,
    *,
    chunk: int = 0,
    offset: int = 0,
) -> bytes:
    """Return a copy of ``fixture`` with one deterministic defect.

    ``chunk`` selects the n-th chunk in file order for the chunk-level
    sites; ``offset`` selects the byte within the signature or within the
    compressed payload. Raises SiteNotFoundError when the target does not
    exist in this fixture.
    """
    header = parse_header(fixture)
    out = bytearray(fixture)
    if site is CorruptionSite.SIGNATURE_BYTE:
        if not 0 <= offset < 8:
            raise SiteNotFoundError(f"signature has no byte {offset}")
        out[offset] ^= 0xFF
        return bytes(out)
    target = _nth_chunk(fixture, header, chunk)
    if site is CorruptionSite.CRC_FIELD:
        out[target.file_offset] ^= 0xFF
    elif site is CorruptionSite.SIZE_FIELD:
        # Claim one byte more than the file can hold past this chunk: the
        # sequential walk must stop with a truncation/implausibility issue.
        remaining = len(fixture) - target.file_offset - CHUNK_HEADER_LEN
        bogus = (remaining - target.base64_size + 1) & 0xFFFFFFFF
        out[target.file_offset + 0x0C : target.file_offset + 0x10] = bogus.to_bytes(4, "little")
    elif site is CorruptionSite.PAYLOAD_BYTE_FLIP:
        if not 0 <= offset < target.deflate_size:
            raise SiteNotFoundError(
                f"chunk {chunk} payload has no byte {offset} (size {target.deflate_size})"
            )
        at = target.file_offset + CHUNK_HEADER_LEN + target.base64_size + offset
        out[at] ^= 0xFF
    else:  # pragma: no cover - enum is closed
        raise SiteNotFoundError(f"unknown corruption site {site!r}")
    return bytes(out)
