"""Turn decoded records into a reviewable, sortable timeline.

Record timestamps are ISO-8601 strings written by the telemetry client;
they are normalized to UTC here so entries from different files sort
together. Records whose time field is missing or unparseable are kept —
an event with no date is still an event — flagged, and sorted after all
dated entries.
"""

from __future__ import annotations

import csv
import io
import json
import re
from datetime import datetime, timedelta, timezone
from fnmatch import fnmatchcase
from typing import Any, Iterable, Mapping, Sequence

from . import catalog
from .errors import RbsError, UnsupportedFormatError
from .extract import (
    extract_app_lifecycle,
    extract_boot_sector,
    extract_disk_inventory,
    extract_process_execution,
)
from .format import (
    PropertyCategory,
    Provenance,
    TelemetryRecord,
    TimelineEntry,
    classify,
)

CSV_HEADER = ("timestamp", "name", "category", "summary", "source_file", "chunk_index", "record_index")

# Accepts the shapes the client emits: 'T' or ' ' separator, optional
# fractional seconds up to 7 digits, 'Z' or a numeric offset or nothing
# (bare times are taken as UTC). datetime.fromisoformat on this Python
# can parse neither 'Z' nor 7-digit fractions, hence the regex.
_ISO_RE = re.compile(
    r"^\s*(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})"
    r"(?:\.(\d{1,9}))?\s*(Z|z|[+-]\d{2}:?\d{2})?\s*$"
)


def parse_record_time(text: str) -> tuple[datetime, int] | None:
    """Parse a record time string to (UTC datetime, 100ns tick remainder).

    Returns None when the string does not look like a timestamp at all or
    encodes an impossible date. Fractional digits beyond seven are dropped;
    the datetime itself carries microseconds, the remainder keeps the
    seventh digit so ordering never loses precision.
    """
    m = _ISO_RE.match(text)
    if m is None:
        return None
    year, month, day, hour, minute, second = (int(g) for g in m.groups()[:6])
    frac_text = (m.group(7) or "").ljust(7, "0")[:7]
    ticks = int(frac_text) if frac_text else 0
    offset = m.group(8)
    if offset is None or offset in ("Z", "z"):
        tz = timezone.utc
    else:
        sign = 1 if offset[0] == "+" else -1
        hh = int(offset[1:3])
        mm = int(offset[-2:])
        tz = timezone(sign * timedelta(hours=hh, minutes=mm))
    try:
        moment = datetime(year, month, day, hour, minute, second, tzinfo=tz)
    except ValueError:
        return None
    return moment.astimezone(timezone.utc), ticks


def _canonical_iso(moment: datetime, ticks: int) -> str:
    base = moment.strftime("%Y-%m-%dT%H:%M:%S")
    if ticks:
        frac = f"{ticks:07d}".rstrip("0")
        return f"{base}.{frac}Z"
    return f"{base}Z"


def _summarize(record: TelemetryRecord, category: PropertyCategory) -> str:
    entry = catalog.lookup(record.name)
    extractor = entry.extractor if entry else None
    try:
        if extractor == "disk_inventory":
            disk = extract_disk_inventory(record)
            if disk.serial_number:
                return f"Disk SN {disk.serial_number} seen"
            return "Disk inventory (no serial)"
        if extractor == "app_lifecycle":
            app = extract_app_lifecycle(record)
            return f"{app.kind.value}: {app.identity}"
        if extractor == "process_execution":
            proc = extract_process_execution(record)
            return f"Executed: {proc.identifier}"
        if extractor == "boot_sector":
            blob = extract_boot_sector(record)
            what = "MBR" if blob.mbr_signature_valid is not None else "Boot sector"
            who = blob.disk_id or "unknown disk"
            return f"{what} image of {who} captured ({blob.size} bytes)"
    except RbsError:
        pass  # fall through: a malformed specimen still deserves a line
    return record.name


def normalize(record: TelemetryRecord) -> TimelineEntry:
    """One record → one timeline entry, never raising on content.

    The summary leans on the structured extractors when the event family
    has one, falling back to the bare event name. The full raw record rides
    along in ``detail`` so nothing is lost downstream.
    """
    category = classify(record.name)
    t = record.time
    timestamp = None
    failed = False
    if isinstance(t, str):
        parsed = parse_record_time(t)
        if parsed is not None:
            timestamp = _canonical_iso(*parsed)
        else:
            failed = True
    elif t is not None:
        failed = True
    return TimelineEntry(
        timestamp_utc=timestamp,
        event_name=record.name,
        category=category,
        summary=_summarize(record, category),
        detail=record.to_json_dict(),
        provenance=record.provenance,
        time_parse_failed=failed,
    )


def _entry_sort_key(entry: TimelineEntry):
    prov = entry.provenance or Provenance(source_file="")
    tail = (
        prov.source_file,
        prov.chunk_index if prov.chunk_index is not None else -1,
        prov.record_index if prov.record_index is not None else -1,
    )
    # Compare parsed instants, not strings: the canonical form trims
    # trailing fraction zeros, and '.' sorts before 'Z', so "…00.0000001Z"
    # would string-sort before the earlier "…00Z".
    parsed = None if entry.timestamp_utc is None else parse_record_time(entry.timestamp_utc)
    if parsed is None:
        return (1, datetime.min.replace(tzinfo=timezone.utc), 0, *tail)
    moment, ticks = parsed
    return (0, moment, ticks, *tail)


def merge_sort(entries: Iterable[TimelineEntry]) -> list[TimelineEntry]:
    """Order entries by instant, then source, chunk and record position.

    Undated entries go last, ordered by provenance; the result is a
    permutation of the input (no merging or deduplication — identical
    events from two files are two observations).
    """
    return sorted(entries, key=_entry_sort_key)


def _jsonl_dict(entry: TimelineEntry) -> dict[str, Any]:
    prov = entry.provenance
    return {
        "timestamp_utc": entry.timestamp_utc,
        "event_name": entry.event_name,
        "category": entry.category.value,
        "summary": entry.summary,
        "time_parse_failed": entry.time_parse_failed,
        "provenance": prov.to_json_dict() if prov else None,
        "detail": entry.detail,
    }


def entry_from_json_dict(obj: Mapping[str, Any]) -> TimelineEntry:
    """Inverse of the JSONL export line (lossless round trip)."""
    prov = obj.get("provenance")
    return TimelineEntry(
        timestamp_utc=obj.get("timestamp_utc"),
        event_name=obj["event_name"],
        category=PropertyCategory(obj["category"]),
        summary=obj.get("summary", ""),
        detail=obj.get("detail") or {},
        provenance=Provenance.from_json_dict(prov) if prov else None,
        time_parse_failed=bool(obj.get("time_parse_failed", False)),
    )


def parse_jsonl(data: bytes | str) -> list[TimelineEntry]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    return [entry_from_json_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def _passes(
    entry: TimelineEntry,
    name_glob: str | None,
    category: PropertyCategory | str | None,
    since: tuple[datetime, int] | None,
    until: tuple[datetime, int] | None,
) -> bool:
    if name_glob is not None and not fnmatchcase(entry.event_name, name_glob):
        return False
    if category is not None:
        wanted = category if isinstance(category, PropertyCategory) else PropertyCategory(category)
        if entry.category is not wanted:
            return False
    if since is not None or until is not None:
        # bounds compare as parsed instants; see _entry_sort_key for why
        # canonical strings are not safely comparable
        when = None if entry.timestamp_utc is None else parse_record_time(entry.timestamp_utc)
        if when is None:
            return False
        if since is not None and when < since:
            return False
        if until is not None and when > until:
            return False
    return True


def _normalize_bound(text: str | None) -> tuple[datetime, int] | None:
    if text is None:
        return None
    parsed = parse_record_time(text)
    if parsed is None:
        raise ValueError(f"not a timestamp: {text!r}")
    return parsed


def export(
    entries: Sequence[TimelineEntry],
    format: str = "jsonl",
    *,
    name_glob: str | None = None,
    category: PropertyCategory | str | None = None,
    since: str | None = None,
    until: str | None = None,
) -> bytes:
    """Serialize (optionally filtered) entries to 'jsonl' or 'csv' bytes.

    Filters are conjunctive. Time bounds are inclusive and exclude undated
    entries. JSONL is the lossless form; CSV flattens to the fixed header
    ``timestamp,name,category,summary,source_file,chunk_index,record_index``
    for spreadsheet triage. Entry order is preserved — sort first.
    """
    since_c = _normalize_bound(since)
    until_c = _normalize_bound(until)
    kept = [e for e in entries if _passes(e, name_glob, category, since_c, until_c)]
    if format == "jsonl":
        lines = [json.dumps(_jsonl_dict(e), ensure_ascii=False) for e in kept]
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
    if format == "csv":
        sink = io.StringIO()
        writer = csv.writer(sink, lineterminator="\r\n")
        writer.writerow(CSV_HEADER)
        for e in kept:
            prov = e.provenance
            writer.writerow(
                (
                    e.timestamp_utc or "",
                    e.event_name,
                    e.category.value,
                    e.summary,
                    prov.source_file if prov else "",
                    "" if prov is None or prov.chunk_index is None else prov.chunk_index,
                    "" if prov is None or prov.record_index is None else prov.record_index,
                )
            )
        return sink.getvalue().encode("utf-8")
    raise UnsupportedFormatError(f"unknown export format {format!r}")


def build_timeline(records: Iterable[TelemetryRecord]) -> list[TimelineEntry]:
    """normalize + merge_sort in one call."""
    return merge_sort(normalize(r) for r in records)
