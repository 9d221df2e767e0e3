"""Catalog of known telemetry event names.

The catalog ships as a human-editable TSV (``data/event_catalog.tsv``) so it
can grow with new Windows releases without code changes. Matching is exact
and case-sensitive: event names are stable identifiers, and prefix rules
would misfile names whose wording suggests a different property than the one
they actually map to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

from .format import PropertyCategory, RbsFileType, TelemetryRecord

_CATALOG_RESOURCE = "event_catalog.tsv"

_FILE_HEADER = """\
# rbskit event catalog
# One entry per line, five tab-separated columns:
#   name	category	source	extractor	notes
# name: exact event name (case-sensitive match)
# category: OsAppLifecycle | HardwareDevice | ProcessExecution | BootSectorPartition
# source: file-type code the event is expected to come from (0x00/0x01/0x02/0x03)
# extractor: optional structured-extractor id (disk_inventory, app_lifecycle,
#            process_execution, boot_sector); empty when none applies
# notes: free text
"""


@dataclass(frozen=True)
class EventCatalogEntry:
    name: str
    category: PropertyCategory
    expected_source: RbsFileType
    extractor: str | None = None
    notes: str = ""


def parse_catalog(text: str) -> tuple[EventCatalogEntry, ...]:
    """Parse catalog TSV text; raises ValueError on malformed or duplicate rows."""
    entries: list[EventCatalogEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if not 3 <= len(cols) <= 5:
            raise ValueError(f"catalog line {lineno}: expected 3-5 columns, got {len(cols)}")
        cols += [""] * (5 - len(cols))
        name, category, source, extractor, notes = cols
        if not name:
            raise ValueError(f"catalog line {lineno}: empty event name")
        if name in seen:
            raise ValueError(f"catalog line {lineno}: duplicate name {name!r}")
        seen.add(name)
        entries.append(
            EventCatalogEntry(
                name=name,
                category=PropertyCategory(category),
                expected_source=RbsFileType(int(source, 16)),
                extractor=extractor or None,
                notes=notes,
            )
        )
    return tuple(entries)


def serialize_catalog(entries: Iterable[EventCatalogEntry]) -> str:
    """Render entries back to the canonical TSV form (inverse of parse_catalog)."""
    lines = [_FILE_HEADER.rstrip("\n")]
    for e in entries:
        row = "\t".join(
            (
                e.name,
                e.category.value,
                f"0x{int(e.expected_source):02x}",
                e.extractor or "",
                e.notes,
            )
        )
        lines.append(row.rstrip("\t"))
    return "\n".join(lines) + "\n"


def _load_packaged() -> tuple[EventCatalogEntry, ...]:
    text = resources.files(__package__).joinpath("data", _CATALOG_RESOURCE).read_text("utf-8")
    return parse_catalog(text)


_ENTRIES: tuple[EventCatalogEntry, ...] = _load_packaged()
_BY_NAME: dict[str, EventCatalogEntry] = {e.name: e for e in _ENTRIES}


def entries() -> tuple[EventCatalogEntry, ...]:
    """All catalog entries, in file order."""
    return _ENTRIES


def lookup(name: str) -> EventCatalogEntry | None:
    """Exact-match lookup; None for anything not catalogued."""
    return _BY_NAME.get(name)


@dataclass
class NameStats:
    """Aggregate over one event name in a decoded corpus."""

    name: str
    count: int = 0
    first_seen: str | None = None
    last_seen: str | None = None
    observed_sources: set[RbsFileType] = field(default_factory=set)
    catalogued: bool = False
    source_mismatch: bool = False


def corpus_stats(records: Iterable[TelemetryRecord]) -> dict[str, NameStats]:
    """Per-name counts, first/last seen times and observed source file types.

    first_seen/last_seen follow stream order (the time string of the first
    and last record encountered); counts and source sets are order-
    insensitive. ``source_mismatch`` is set when a record was observed in a
    file type other than the catalogued one.
    """
    stats: dict[str, NameStats] = {}
    for record in records:
        entry = lookup(record.name)
        st = stats.get(record.name)
        if st is None:
            st = NameStats(name=record.name, catalogued=entry is not None)
            stats[record.name] = st
        st.count += 1
        t = record.time
        if isinstance(t, str):
            if st.first_seen is None:
                st.first_seen = t
            st.last_seen = t
        prov = record.provenance
        if prov is not None and prov.file_type is not None:
            st.observed_sources.add(prov.file_type)
            if entry is not None and prov.file_type != entry.expected_source:
                st.source_mismatch = True
    return stats
