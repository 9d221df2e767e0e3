"""Signature carver: find telemetry stores embedded in disk/memory images.

The stores are fixed-size files whose first eight bytes are a constant
signature, so a linear scan is enough; the work is in deciding how much to
trust each hit and how many bytes to take. A hit whose header parses and
whose nominal size fits inside the image is High confidence and carved at
the nominal size from the size table. Anything else — header damaged, type
byte out of range, or the image ending mid-body — is carved Low, with the
extent settled either by clamping to the image or by walking chunk frames
until they stop making sense.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterator, Union

from .errors import RbsError, TruncatedError
from .format import (
    CHUNK_HEADER_LEN,
    HEADER_LEN_V5,
    SIGNATURE_PREFIX,
    RbsFileType,
    RbsHeader,
    RbsVersion,
    SizeEra,
    fixed_size_bytes,
    parse_chunk_header,
    parse_header,
    parse_signature,
)

_SIGNATURE_DIGITS = frozenset(b"3578")
# Carry enough bytes across window boundaries that a signature starting near
# the end of one window is re-seen, with a whole V5+ header, in the next.
_CARRY = HEADER_LEN_V5 + len(SIGNATURE_PREFIX) + 8
DEFAULT_WINDOW_SIZE = 8 * 1024 * 1024

CarveSource = Union[str, "os.PathLike[str]", BinaryIO]


class CarveConfidence(Enum):
    HIGH = "High"
    LOW = "Low"


@dataclass(frozen=True)
class CarveHit:
    """One signature hit and the extent the carver settled on.

    ``carved_size`` counts bytes actually present in the image;
    ``nominal_size`` is the fixed size the store should occupy, when version
    and type are known. They differ only when the image ends early.
    """

    offset: int
    version: RbsVersion
    file_type: RbsFileType | None
    carved_size: int
    nominal_size: int | None
    confidence: CarveConfidence

    def to_json_dict(self) -> dict:
        return {
            "offset": self.offset,
            "version": self.version.name,
            "file_type": None if self.file_type is None else self.file_type.name,
            "carved_size": self.carved_size,
            "nominal_size": self.nominal_size,
            "confidence": self.confidence.value,
        }


@dataclass(frozen=True)
class CarveExtraction:
    data: bytes
    padded: bool  # zero bytes appended because the image ended early


def _open_source(source: CarveSource) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(Path(source), "rb"), True
    if hasattr(source, "read") and hasattr(source, "seek"):
        return source, False
    raise TypeError("carving needs a path or a seekable binary file object")


def _probe_chunk_extent(body: bytes, start: int) -> int:
    """How far a chain of plausible chunk frames extends into ``body``.

    Used for damaged-header hits where the nominal size is unknowable: walk
    frames from ``start`` until padding, end of data, or nonsense sizes, and
    return the end offset of the last complete frame.
    """
    pos = start
    n = len(body)
    while pos + CHUNK_HEADER_LEN <= n:
        window = body[pos : pos + CHUNK_HEADER_LEN]
        if not any(window):
            break
        _, _, b64_size, defl_size, _, _ = parse_chunk_header(body, pos)
        end = pos + CHUNK_HEADER_LEN + b64_size + defl_size
        if end > n:
            break
        pos = end
    return pos


def _classify_hit(
    image: BinaryIO, image_size: int, offset: int, era: SizeEra | None
) -> CarveHit:
    image.seek(offset)
    head = image.read(HEADER_LEN_V5)
    version = parse_signature(head)
    header: RbsHeader | None = None
    try:
        header = parse_header(head)
    except RbsError:
        header = None

    if header is not None:
        nominal = fixed_size_bytes(version, header.file_type, era=era)
        available = image_size - offset
        if available >= nominal:
            return CarveHit(
                offset=offset,
                version=version,
                file_type=header.file_type,
                carved_size=nominal,
                nominal_size=nominal,
                confidence=CarveConfidence.HIGH,
            )
        return CarveHit(
            offset=offset,
            version=version,
            file_type=header.file_type,
            carved_size=available,
            nominal_size=nominal,
            confidence=CarveConfidence.LOW,
        )

    # Header would not parse (bad type byte or too few bytes). Walk chunk
    # frames to find a defensible extent; the signature alone is still worth
    # reporting.
    max_take = min(image_size - offset, max(_grid_ceiling(version, era), version.header_len))
    image.seek(offset)
    body = image.read(max_take)
    if len(body) < version.header_len:
        extent = len(body)
    else:
        extent = _probe_chunk_extent(body, version.header_len)
    return CarveHit(
        offset=offset,
        version=version,
        file_type=None,
        carved_size=max(extent, min(len(body), version.header_len)),
        nominal_size=None,
        confidence=CarveConfidence.LOW,
    )


def _grid_ceiling(version: RbsVersion, era: SizeEra | None) -> int:
    return max(fixed_size_bytes(version, ft, era=era) for ft in RbsFileType)


def scan(
    source: CarveSource,
    *,
    window_size: int = DEFAULT_WINDOW_SIZE,
    era: SizeEra | None = None,
) -> Iterator[CarveHit]:
    """Scan an image for store signatures, yielding hits in offset order.

    Every signature occurrence is reported, whatever the alignment; windows
    overlap so matches straddling a window boundary are not lost. ``era``
    selects the size table for legacy-version hits (defaults per version).
    """
    if window_size <= _CARRY:
        raise ValueError(f"window_size must exceed {_CARRY}")
    image, owned = _open_source(source)
    try:
        image.seek(0, io.SEEK_END)
        image_size = image.tell()
        carry = b""
        base = 0  # absolute offset of carry[0]
        read_pos = 0
        last_reported = -1
        while True:
            image.seek(read_pos)
            window = image.read(window_size)
            if not window:
                break
            read_pos += len(window)
            buf = carry + window
            at_eof = read_pos >= image_size
            search_at = 0
            while True:
                idx = buf.find(SIGNATURE_PREFIX, search_at)
                if idx == -1:
                    break
                search_at = idx + 1
                # Defer matches too close to the buffer end: the next window
                # re-presents them with full header context.
                if not at_eof and idx > len(buf) - _CARRY:
                    break
                absolute = base + idx
                if absolute <= last_reported:
                    continue
                digit = buf[idx + 7 : idx + 8]
                if not digit or digit[0] not in _SIGNATURE_DIGITS:
                    continue
                last_reported = absolute
                yield _classify_hit(image, image_size, absolute, era)
            keep = min(len(buf), _CARRY)
            carry = buf[len(buf) - keep :]
            base = base + len(buf) - keep
            if at_eof:
                break
    finally:
        if owned:
            image.close()


def extract(source: CarveSource, hit: CarveHit) -> CarveExtraction:
    """Pull one hit out of the image.

    Returns ``nominal_size`` bytes when the nominal size is known — zero
    padding the tail if the image ends early, so a truncated store still
    hashes and parses like a fixed-size file — and ``carved_size`` bytes
    otherwise. Raises OSError when the hit offset lies outside the image
    (a stale hit against a different file).
    """
    image, owned = _open_source(source)
    try:
        image.seek(0, io.SEEK_END)
        image_size = image.tell()
        if hit.offset >= image_size:
            raise OSError(
                f"hit offset 0x{hit.offset:x} is beyond the image ({image_size} bytes)"
            )
        want = hit.nominal_size if hit.nominal_size is not None else hit.carved_size
        image.seek(hit.offset)
        data = image.read(want)
        padded = len(data) < want
        if padded:
            data = data.ljust(want, b"\x00")
        return CarveExtraction(data=data, padded=padded)
    finally:
        if owned:
            image.close()
