"""Structured extraction of high-value fields from specific event families.

Each extractor checks the event name, digs into the record's data object and
returns a typed result. Numeric fields frequently arrive as decimal strings
(the emitting service stringifies 64-bit values); extractors parse those and
keep the raw mapping around so nothing is lost when parsing fails.
"""

from __future__ import annotations

import base64
import binascii
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

from . import catalog
from .errors import NoDataObjectError, NoDecodableFieldError, WrongEventNameError
from .format import TelemetryRecord

log = logging.getLogger(__name__)

DISK_INVENTORY_EVENT = (
    "Microsoft.Windows.Inventory.General.InventoryMiscellaneousPhysicalDiskInfoAdd"
)
APP_INSTALL_EVENT = "Microsoft.Windows.Inventory.Core.InventoryApplicationAdd"
APP_REMOVE_EVENT = "Microsoft.Windows.Inventory.Core.InventoryApplicationRemove"
MBR_EVENT = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousMbrDiskAdd"
GPT_EVENT = "Microsoft.Windows.Inventory.General.InventoryMiscellaneousGptDiskAdd"


def _names_for(extractor: str) -> frozenset[str]:
    return frozenset(e.name for e in catalog.entries() if e.extractor == extractor)


PROCESS_EXECUTION_EVENTS = _names_for("process_execution")
BOOT_SECTOR_EVENTS = _names_for("boot_sector")
APP_LIFECYCLE_EVENTS = _names_for("app_lifecycle")

# Field names tried, in order, when hunting for a process identity or a boot
# sector blob. Callers can pass their own list when a new OS build renames
# one.
DEFAULT_PROCESS_ID_FIELDS: tuple[str, ...] = ("AppId", "ExeName", "AppName", "ProcessName")
DEFAULT_BOOT_BLOB_FIELDS: tuple[str, ...] = (
    "Mbr",
    "MBR",
    "BootSector",
    "Sector",
    "RawData",
    "Raw",
    "Bytes",
    "Blob",
    "Gpt",
    "GPT",
)
_DISK_ID_FIELDS: tuple[str, ...] = ("DeviceId", "DiskId", "Device", "Disk", "Id")

_HEX_RE = re.compile(r"^[0-9a-fA-F]+$")


def _data_of(record: TelemetryRecord, expected: str | frozenset[str]) -> Mapping[str, Any]:
    names = {expected} if isinstance(expected, str) else expected
    if record.name not in names:
        raise WrongEventNameError(
            f"expected {sorted(names)[0] if len(names) == 1 else 'one of ' + str(sorted(names))}, "
            f"got {record.name!r}"
        )
    data = record.data
    if not isinstance(data, Mapping):
        raise NoDataObjectError(f"record {record.name!r} carries no data object")
    return data


def _as_int(value: Any) -> int | None:
    """Integers pass through; decimal strings parse; anything else is None."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.isdigit() or (text.startswith("-") and text[1:].isdigit()):
            return int(text)
        if text:
            log.warning("non-numeric value kept raw: %r", value)
    return None


def _as_str(value: Any) -> str | None:
    return value if isinstance(value, str) and value else None


@dataclass(frozen=True)
class DiskInventory:
    """Physical-disk identity row; absent fields stay None."""

    device_id: str | None
    serial_number: str | None
    index: int | None
    size_bytes: int | None
    num_partitions: int | None
    bytes_per_sector: int | None
    media_type: str | None
    raw: Mapping[str, Any]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "serial_number": self.serial_number,
            "index": self.index,
            "size_bytes": self.size_bytes,
            "num_partitions": self.num_partitions,
            "bytes_per_sector": self.bytes_per_sector,
            "media_type": self.media_type,
        }


def extract_disk_inventory(record: TelemetryRecord) -> DiskInventory:
    """Disk identity from a physical-disk inventory event.

    An empty data object is legal (all fields come back None); a missing
    one is not. Size comes as a decimal string on every observed build, so
    it is parsed to an int; the verbatim value stays in ``raw``.
    """
    data = _data_of(record, DISK_INVENTORY_EVENT)
    return DiskInventory(
        device_id=_as_str(data.get("DeviceId")) or _as_str(data.get("ObjectId")),
        serial_number=_as_str(data.get("SerialNumber")),
        index=_as_int(data.get("Index")),
        size_bytes=_as_int(data.get("Size")),
        num_partitions=_as_int(data.get("NumPartitions")),
        bytes_per_sector=_as_int(data.get("BytesPerSector")),
        media_type=_as_str(data.get("MediaType")),
        raw=data,
    )


class AppLifecycleKind(Enum):
    INSTALL = "Install"
    REMOVE = "Remove"


@dataclass(frozen=True)
class AppLifecycleEvent:
    kind: AppLifecycleKind
    app_name: str | None
    app_id: str | None
    app_version: str | None
    time: str | None
    raw: Mapping[str, Any]

    @property
    def identity(self) -> str:
        return self.app_name or self.app_id or "<unnamed application>"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "app_name": self.app_name,
            "app_id": self.app_id,
            "app_version": self.app_version,
            "time": self.time,
        }


def extract_app_lifecycle(record: TelemetryRecord) -> AppLifecycleEvent:
    """Install/remove event for an application, kind taken from the name."""
    data = _data_of(record, APP_LIFECYCLE_EVENTS)
    kind = (
        AppLifecycleKind.REMOVE
        if record.name == APP_REMOVE_EVENT
        else AppLifecycleKind.INSTALL
    )
    return AppLifecycleEvent(
        kind=kind,
        app_name=_as_str(data.get("Name")) or _as_str(data.get("ProgramName")),
        app_id=_as_str(data.get("ProgramId")) or _as_str(record.app_id),
        app_version=_as_str(data.get("Version")),
        time=record.time if isinstance(record.time, str) else None,
        raw=data,
    )


@dataclass(frozen=True)
class ProcessExecutionEvent:
    identifier: str
    identifier_missing: bool
    time: str | None
    source_event: str

    @property
    def undated(self) -> bool:
        return self.time is None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "identifier": self.identifier,
            "identifier_missing": self.identifier_missing,
            "time": self.time,
            "source_event": self.source_event,
        }


def extract_process_execution(
    record: TelemetryRecord,
    data_field_candidates: Sequence[str] = DEFAULT_PROCESS_ID_FIELDS,
) -> ProcessExecutionEvent:
    """Process identity from an execution-indicating event.

    The envelope appId wins when present; otherwise the data object is
    searched through ``data_field_candidates`` in order. A record with no
    identity anywhere is still evidence of execution, so it comes back as
    "unknown" with ``identifier_missing`` set rather than being dropped.
    """
    names = {record.name} & PROCESS_EXECUTION_EVENTS
    if not names:
        raise WrongEventNameError(
            f"{record.name!r} is not an execution-indicating event"
        )
    identifier = _as_str(record.app_id)
    if identifier is None:
        data = record.data if isinstance(record.data, Mapping) else {}
        for key in data_field_candidates:
            identifier = _as_str(data.get(key))
            if identifier is not None:
                break
    return ProcessExecutionEvent(
        identifier=identifier if identifier is not None else "unknown",
        identifier_missing=identifier is None,
        time=record.time if isinstance(record.time, str) else None,
        source_event=record.name,
    )


class BlobEncoding(Enum):
    BASE64 = "Base64"
    HEX = "Hex"


@dataclass(frozen=True)
class BootSectorBlob:
    disk_id: str | None
    sector: bytes
    encoding: BlobEncoding
    field_name: str
    mbr_signature_valid: bool | None  # None for non-MBR events

    @property
    def size(self) -> int:
        return len(self.sector)


def _try_decode_blob(text: str) -> tuple[bytes, BlobEncoding] | None:
    stripped = "".join(text.split())
    # A string of pure hex digits is ambiguous: many such strings are also
    # valid Base64, which would decode them to garbage. Hex wins that tie.
    if len(stripped) % 2 == 0 and _HEX_RE.match(stripped):
        try:
            return bytes.fromhex(stripped), BlobEncoding.HEX
        except ValueError:  # pragma: no cover - regex already guarantees this
            pass
    try:
        return base64.b64decode(stripped, validate=True), BlobEncoding.BASE64
    except (binascii.Error, ValueError):
        pass
    try:
        return bytes.fromhex(stripped), BlobEncoding.HEX
    except ValueError:
        return None


def extract_boot_sector(
    record: TelemetryRecord,
    field_candidates: Sequence[str] = DEFAULT_BOOT_BLOB_FIELDS,
) -> BootSectorBlob:
    """Recover a raw boot-sector image embedded in a partition event.

    Tries each candidate field in order, accepting the first one that
    decodes (Base64 or hex) to at least 512 bytes — a sector cannot be
    smaller. For MBR events the 0x55AA signature at offset 510 is checked
    and reported, not enforced: a damaged sector is still evidence.
    """
    data = _data_of(record, BOOT_SECTOR_EVENTS)
    for field_name in field_candidates:
        value = data.get(field_name)
        if not isinstance(value, str) or not value:
            continue
        decoded = _try_decode_blob(value)
        if decoded is None or len(decoded[0]) < 512:
            continue
        sector, encoding = decoded
        mbr_ok: bool | None = None
        if record.name == MBR_EVENT:
            mbr_ok = sector[510:512] == b"\x55\xaa"
        disk = None
        for key in _DISK_ID_FIELDS:
            disk = _as_str(data.get(key))
            if disk:
                break
        return BootSectorBlob(
            disk_id=disk,
            sector=sector,
            encoding=encoding,
            field_name=field_name,
            mbr_signature_valid=mbr_ok,
        )
    raise NoDecodableFieldError(
        f"no field of {record.name!r} decodes to a plausible boot sector"
    )
