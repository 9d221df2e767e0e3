"""Command-line interface.

Exit codes follow a three-way contract so batch pipelines can tell evidence
problems from tool problems: 0 clean, 1 the input was read but degraded
(failed chunks or warnings), 2 the tool could not do its job at all (bad
arguments, unreadable file, broken header). Data goes to stdout, every
diagnostic to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__, carve as carve_mod, timeline as timeline_mod
from .catalog import lookup
from .errors import RbsError
from .format import (
    HEADER_LEN_V5,
    PropertyCategory,
    RbsFileType,
    RbsVersion,
    SizeEra,
    canonical_filename,
    filetime_from_unix,
    fixed_size_bytes,
    parse_header,
)
from .reader import read_file
from .writer import WriterConfig, build_fixture

log = logging.getLogger("rbskit")

_TYPE_NAMES = {
    "normal": RbsFileType.NORMAL,
    "normal-critical": RbsFileType.NORMAL_CRITICAL,
    "cost-deferred": RbsFileType.COST_DEFERRED,
    "realtime": RbsFileType.REALTIME,
}
_CATEGORY_NAMES = [c.value for c in PropertyCategory]


def _die(message: str) -> int:
    log.error("%s", message)
    return 2


def _header_json(header) -> dict:
    return {
        "signature": header.signature_version.signature.decode("ascii"),
        "version": header.signature_version.name,
        "file_type": int(header.file_type),
        "file_type_name": header.file_type.name,
        "canonical_filename": canonical_filename(header.signature_version, header.file_type),
        "last_modified_ticks": header.last_modified,
        "last_modified_utc": header.last_modified_iso(),
        "last_chunk_offset_1": header.last_chunk_offset_1,
        "last_chunk_offset_2": header.last_chunk_offset_2,
        "last_chunk_size": header.last_chunk_size,
        "total_chunk_size": header.total_chunk_size,
        "last_chunk_index_1": header.last_chunk_index_1,
        "last_chunk_index_2": header.last_chunk_index_2,
        "cursor_mismatch": header.cursor_mismatch,
    }


def _cmd_info(args: argparse.Namespace) -> int:
    try:
        with open(args.path, "rb") as fh:
            head = fh.read(HEADER_LEN_V5)
        header = parse_header(head)
    except (OSError, RbsError) as exc:
        return _die(f"{args.path}: {exc}")
    if args.json:
        json.dump(_header_json(header), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        h = _header_json(header)
        print(f"signature:        {h['signature']} (version {h['version']})")
        print(f"file type:        0x{h['file_type']:02x} ({h['file_type_name']})")
        print(f"canonical name:   {h['canonical_filename']}")
        print(f"last modified:    {h['last_modified_utc']} (ticks {h['last_modified_ticks']})")
        print(f"last chunk:       offset 0x{h['last_chunk_offset_1']:x}, "
              f"size {h['last_chunk_size']}, index {h['last_chunk_index_1']}")
        print(f"total chunk size: {h['total_chunk_size']}")
    if header.cursor_mismatch:
        log.warning("cursor copies disagree (service may have halted mid-write)")
        return 1
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    status = 0
    for path in args.paths:
        try:
            result = read_file(path)
        except (OSError, RbsError) as exc:
            log.error("%s: %s", path, exc)
            status = max(status, 2)
            continue
        rep = result.report
        print(
            f"{path}: chunks ok={rep.chunks_ok} failed={rep.chunks_failed} "
            f"records={rep.records} crc={rep.crc_mode_observed.value} "
            f"warnings={len(rep.warnings)}"
        )
        for w in rep.warnings:
            log.warning("%s: %s", path, w)
        if rep.chunks_failed or rep.warnings:
            status = max(status, 1)
    return status


def _cmd_dump(args: argparse.Namespace) -> int:
    try:
        result = read_file(args.path)
    except (OSError, RbsError) as exc:
        return _die(f"{args.path}: {exc}")
    for record in result.records:
        obj = record.to_json_dict()
        if not args.raw_json and record.provenance is not None:
            obj = dict(obj)
            obj["_provenance"] = record.provenance.to_json_dict()
        sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
    rep = result.report
    for w in rep.warnings:
        log.warning("%s: %s", args.path, w)
    return 1 if (rep.chunks_failed or rep.warnings) else 0


def _cmd_timeline(args: argparse.Namespace) -> int:
    entries = []
    status = 0
    for path in args.paths:
        try:
            result = read_file(path)
        except (OSError, RbsError) as exc:
            return _die(f"{path}: {exc}")
        rep = result.report
        for w in rep.warnings:
            log.warning("%s: %s", path, w)
        if rep.chunks_failed or rep.warnings:
            status = max(status, 1)
        entries.extend(timeline_mod.normalize(r) for r in result.records)
    ordered = timeline_mod.merge_sort(entries)
    try:
        payload = timeline_mod.export(
            ordered,
            args.format,
            name_glob=args.name,
            category=args.category,
            since=args.since,
            until=args.until,
        )
    except (ValueError, RbsError) as exc:
        return _die(str(exc))
    if args.output is not None:
        Path(args.output).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    return status


def _cmd_carve(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        hits = list(carve_mod.scan(args.image))
    except (OSError, RbsError) as exc:
        return _die(f"{args.image}: {exc}")
    manifest_path = out_dir / "manifest.jsonl"
    try:
        with open(manifest_path, "w", encoding="utf-8") as manifest:
            for hit in hits:
                extraction = carve_mod.extract(args.image, hit)
                type_label = (
                    hit.file_type.name.lower() if hit.file_type is not None else "unknown"
                )
                name = f"carve_{hit.offset}_{type_label}.rbs"
                (out_dir / name).write_bytes(extraction.data)
                line = dict(hit.to_json_dict(), output=name, padded=extraction.padded)
                manifest.write(json.dumps(line) + "\n")
                sys.stdout.write(json.dumps(line) + "\n")
                if extraction.padded:
                    log.warning("%s: image ended early; output zero-padded", name)
    except OSError as exc:
        return _die(str(exc))
    log.info("%d hit(s); manifest at %s", len(hits), manifest_path)
    return 0


def _synthetic_data(extractor: str | None, rng, ordinal: int) -> dict:
    """A data object consistent with the event family's extractor."""
    import base64

    if extractor == "disk_inventory":
        return {
            "DeviceId": f"\\\\.\\PHYSICALDRIVE{ordinal % 4}",
            "SerialNumber": f"SN{rng.getrandbits(48):012X}",
            "Size": str(rng.choice((256, 512, 1000)) * 1_000_000_000 + ordinal),
            "NumPartitions": str(1 + ordinal % 4),
            "BytesPerSector": "512",
            "MediaType": rng.choice(("SSD", "HDD")),
            "Index": str(ordinal % 4),
        }
    if extractor == "app_lifecycle":
        return {
            "Name": f"Sample App {ordinal}",
            "ProgramId": f"0000{rng.getrandbits(64):016x}",
            "Version": f"1.{ordinal % 10}.0",
        }
    if extractor == "process_execution":
        return {"ExeName": f"sample{ordinal % 7}.exe"}
    if extractor == "boot_sector":
        sector = bytearray(rng.randbytes(512))
        sector[510:512] = b"\x55\xaa"
        return {
            "DeviceId": f"\\\\.\\PHYSICALDRIVE{ordinal % 4}",
            "Mbr": base64.b64encode(bytes(sector)).decode("ascii"),
        }
    return {"Payload": rng.randbytes(24).hex()}


def _synthesize_batches(args: argparse.Namespace) -> list[list[dict]]:
    """Deterministic record batches for gen-fixture when no JSONL is given."""
    import random

    from .catalog import entries as catalog_entries
    from .format import filetime_to_iso

    rng = random.Random(args.seed)
    base_ticks = args.timestamp if args.timestamp is not None else 133_500_000_000_000_000
    cat = catalog_entries()
    batches = []
    counter = 0
    for _ in range(args.batches):
        batch = []
        for _ in range(args.records_per_batch):
            entry = cat[counter % len(cat)]
            record = {
                "ver": "4.0",
                "name": entry.name,
                "time": filetime_to_iso(base_ticks + counter * 10_000_000),
                "data": _synthetic_data(entry.extractor, rng, counter),
            }
            if entry.extractor == "process_execution" and counter % 2 == 0:
                record["appId"] = f"W:0000sample{counter % 7}.exe"
            batch.append(record)
            counter += 1
        batches.append(batch)
    return batches


def _load_batches(path: str, per_batch: int) -> list[list[dict]]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    per = max(per_batch, 1)
    return [records[i : i + per] for i in range(0, len(records), per)]


def _cmd_gen_fixture(args: argparse.Namespace) -> int:
    version = RbsVersion[f"V{args.version}"]
    file_type = _TYPE_NAMES[args.type]
    override = args.size_kib * 1024 if args.size_kib is not None else None
    config = WriterConfig(
        version=version,
        file_type=file_type,
        fixed_size_override=override,
        era=SizeEra(args.era) if args.era else None,
        base64_blob_size=args.base64_size,
        start_chunk_index=args.start_index,
        timestamp_ticks=args.timestamp,
        seed=args.seed,
        newline_separated=args.newline_separated,
    )
    if args.records is not None:
        batches = _load_batches(args.records, args.records_per_batch)
    else:
        batches = _synthesize_batches(args)
    try:
        if args.wrap and batches:
            result = build_fixture(config, batches)
            total = sum(p.length for p in result.placements)
            capacity = config.fixed_size() - version.header_len
            need = args.wrap * capacity
            if total and total < need:
                batches = batches * math.ceil(need / total)
        result = build_fixture(config, batches)
        Path(args.output).write_bytes(result.data)
    except (RbsError, ValueError, OSError) as exc:
        return _die(str(exc))
    log.info(
        "%s: %d bytes, %d chunk(s)%s",
        args.output,
        len(result.data),
        len(result.placements),
        ", wrapped" if result.wrapped else "",
    )
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    from .extract import (
        extract_app_lifecycle,
        extract_boot_sector,
        extract_disk_inventory,
        extract_process_execution,
    )

    try:
        result = read_file(args.path)
    except (OSError, RbsError) as exc:
        return _die(f"{args.path}: {exc}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    want_all = not (args.disks or args.apps or args.processes or args.boot_sectors)
    sinks = {
        "disk_inventory": [] if (want_all or args.disks) else None,
        "app_lifecycle": [] if (want_all or args.apps) else None,
        "process_execution": [] if (want_all or args.processes) else None,
    }
    boot_blobs = [] if (want_all or args.boot_sectors) else None
    status = 0
    rep = result.report
    for w in rep.warnings:
        log.warning("%s: %s", args.path, w)
    if rep.chunks_failed or rep.warnings:
        status = 1

    for record in result.records:
        entry = lookup(record.name)
        if entry is None or entry.extractor is None:
            continue
        try:
            if entry.extractor == "disk_inventory" and sinks["disk_inventory"] is not None:
                sinks["disk_inventory"].append(extract_disk_inventory(record).to_json_dict())
            elif entry.extractor == "app_lifecycle" and sinks["app_lifecycle"] is not None:
                sinks["app_lifecycle"].append(extract_app_lifecycle(record).to_json_dict())
            elif entry.extractor == "process_execution" and sinks["process_execution"] is not None:
                sinks["process_execution"].append(extract_process_execution(record).to_json_dict())
            elif entry.extractor == "boot_sector" and boot_blobs is not None:
                boot_blobs.append(extract_boot_sector(record))
        except RbsError as exc:
            log.warning("%s: %s: %s", args.path, record.name, exc)
            status = max(status, 1)

    def _write_jsonl(name: str, rows) -> None:
        if rows is None:
            return
        path = out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        print(f"{path}: {len(rows)} row(s)")

    _write_jsonl("disks.jsonl", sinks["disk_inventory"])
    _write_jsonl("apps.jsonl", sinks["app_lifecycle"])
    _write_jsonl("processes.jsonl", sinks["process_execution"])
    if boot_blobs is not None:
        import re

        for i, blob in enumerate(boot_blobs):
            disk = re.sub(r"[^A-Za-z0-9._-]+", "_", blob.disk_id or f"disk{i}").strip("_.") or f"disk{i}"
            kind = "mbr" if blob.mbr_signature_valid is not None else "boot"
            path = out_dir / f"{kind}_{disk}.bin"
            path.write_bytes(blob.sector)
            print(f"{path}: {blob.size} bytes")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbskit",
        description="Parse, verify, carve and timeline ring-buffered telemetry stores.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="print the file header")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="emit the header as JSON")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("verify", help="check chunk integrity")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("dump", help="decode records to JSONL on stdout")
    p.add_argument("path")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument(
        "--records",
        action="store_true",
        help="records with _provenance injected (default)",
    )
    mode.add_argument("--raw-json", action="store_true", help="verbatim records only")
    p.set_defaults(func=_cmd_dump)

    p = sub.add_parser("timeline", help="normalized, merged, filtered timeline")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("-o", "--output", help="write here instead of stdout")
    p.add_argument("--name", help="event-name glob, e.g. 'Census.*'")
    p.add_argument("--category", choices=_CATEGORY_NAMES)
    p.add_argument("--since", help="inclusive lower time bound (ISO-8601)")
    p.add_argument("--until", help="inclusive upper time bound (ISO-8601)")
    p.set_defaults(func=_cmd_timeline)

    p = sub.add_parser("carve", help="find and extract stores inside an image")
    p.add_argument("image")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_carve)

    p = sub.add_parser("gen-fixture", help="write a synthetic store")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--file-version", dest="version", type=int, choices=(3, 5, 7, 8), default=8)
    p.add_argument("--type", choices=sorted(_TYPE_NAMES), default="realtime")
    p.add_argument("--era", choices=[e.value for e in SizeEra], default=None)
    p.add_argument("--size-kib", type=int, help="override the nominal size")
    p.add_argument("--records", help="JSONL file of records to embed")
    p.add_argument("--records-per-batch", type=int, default=2)
    p.add_argument("--batches", type=int, default=3)
    p.add_argument("--wrap", type=int, default=0, help="repeat batches to overfill the ring N times")
    p.add_argument("--timestamp", type=int, help="header timestamp in FILETIME ticks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base64-size", type=int, default=256)
    p.add_argument("--start-index", type=int, default=0)
    p.add_argument("--newline-separated", action="store_true")
    p.set_defaults(func=_cmd_gen_fixture)

    p = sub.add_parser("extract", help="structured artifacts (disks, apps, processes, boot sectors)")
    p.add_argument("path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--disks", action="store_true")
    p.add_argument("--apps", action="store_true")
    p.add_argument("--processes", action="store_true")
    p.add_argument("--boot-sectors", action="store_true")
    p.set_defaults(func=_cmd_extract)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except BrokenPipeError:  # downstream closed the pipe; not our failure
        return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
