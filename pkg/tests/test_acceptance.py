"""Acceptance gate: ten format-conformance and property criteria.

Each test prints one PASS/FAIL verdict line (collected into the terminal
summary) and enforces its stated tolerance or runtime budget directly.
"""

import base64
import io
import random
import re
import time
from contextlib import contextmanager

import pytest

from rbskit import carve, extract, reader, timeline
from rbskit.format import (
    CHUNK_HEADER_LEN,
    PropertyCategory,
    RbsFileType,
    RbsVersion,
    SizeEra,
    classify,
    expected_source,
    filetime_from_unix,
    filetime_to_iso,
    fixed_size_bytes,
    parse_chunk_header,
    parse_header,
)
from rbskit.writer import CorruptionSite, WriterConfig, build_fixture, corrupt
from rbskit import catalog

from conftest import record_acceptance, reference_epoch_offset_seconds


@contextmanager
def criterion(num: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        record_acceptance(f"criterion {num:>2} FAIL  {title}")
        raise
    record_acceptance(
        f"criterion {num:>2} PASS  {title}  [{time.perf_counter() - start:.2f}s]"
    )


# --- 1: header goldens, 16/16 version-type pairs, < 1 s ---------------------------


def test_criterion_01_header_goldens():
    with criterion(1, "header goldens 16/16 (version x type)"):
        start = time.perf_counter()
        checked = 0
        for version in RbsVersion:
            for file_type in RbsFileType:
                fx = build_fixture(
                    WriterConfig(
                        version=version,
                        file_type=file_type,
                        fixed_size_override=4096,
                        timestamp_ticks=131_000_000_000_000_000,
                    ),
                    [],
                )
                header = parse_header(fx.data)
                assert header.signature_version is version
                assert header.file_type is file_type
                checked += 1
        assert checked == 16
        assert time.perf_counter() - start < 1.0


# --- 2: size table, all 12 cells exact --------------------------------------------


def test_criterion_02_size_table():
    expected_kib = {
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
    with criterion(2, "size grid 12/12 cells exact (incl. 1507->1511 doubling)"):
        cells = 0
        for era, row in expected_kib.items():
            version = RbsVersion.V3 if era is not SizeEra.MODERN else RbsVersion.V8
            for file_type, kib in row.items():
                assert fixed_size_bytes(version, file_type, era=era) == kib * 1024
                cells += 1
        assert cells == 12
        for file_type in RbsFileType:
            assert (
                expected_kib[SizeEra.LEGACY_1511][file_type]
                == 2 * expected_kib[SizeEra.LEGACY_1507][file_type]
            )


# --- 3: 200 randomized round trips, < 60 s ----------------------------------------


def test_criterion_03_round_trip_200():
    with criterion(3, "round trip 200/200 randomized fixtures"):
        start = time.perf_counter()
        rng = random.Random(0xC3)
        wrapped_seen = 0
        unwrapped_seen = 0
        for trial in range(200):
            n_batches = rng.randint(1, 20)
            per_batch = rng.randint(1, 50)
            blob = rng.randint(0, 4096)
            size = rng.choice((16, 32, 64)) * 1024
            batches = []
            counter = 0
            for b in range(n_batches):
                batch = []
                for _ in range(per_batch):
                    batch.append(
                        {
                            "ver": "4.0",
                            "name": f"RT.E{trial}.{counter}",
                            "time": f"2023-01-01T{counter // 3600 % 24:02d}:"
                            f"{counter // 60 % 60:02d}:{counter % 60:02d}Z",
                            "data": {"n": counter, "pad": rng.randbytes(8).hex()},
                        }
                    )
                    counter += 1
                batches.append(batch)
            config = WriterConfig(
                fixed_size_override=size,
                base64_blob_size=blob,
                timestamp_ticks=133_000_000_000_000_000 + trial,
                seed=trial,
            )
            fx = build_fixture(config, batches)
            if fx.wrapped:
                wrapped_seen += 1
            else:
                unwrapped_seen += 1
            expected = [r for j in fx.surviving_batches for r in batches[j]]
            result = reader.read_file(fx.data)
            assert [r.raw for r in result.records] == expected, f"trial {trial}"
        assert wrapped_seen >= 10 and unwrapped_seen >= 10
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0


# --- 4: corruption detection 100/100; pristine CRC mode 100/100 -------------------


def test_criterion_04_corruption_detection():
    with criterion(4, "payload flips 100/100 detected; pristine mode OverCompressed 100/100"):
        rng = random.Random(0xC4)
        detected = 0
        pristine_mode_ok = 0
        for trial in range(100):
            fx = build_fixture(
                WriterConfig(
                    fixed_size_override=32 * 1024,
                    timestamp_ticks=133_000_000_000_000_000,
                    seed=trial,
                    base64_blob_size=rng.randint(0, 512),
                ),
                [
                    [
                        {
                            "ver": "4.0",
                            "name": f"C4.E{trial}.{b}.{i}",
                            "data": {"pad": rng.randbytes(40).hex()},
                        }
                        for i in range(3)
                    ]
                    for b in range(3)
                ],
            )
            target = rng.randrange(3)
            placement = fx.placements[target]
            _, _, b64, deflate, _, _ = parse_chunk_header(fx.data, placement.offset)
            header = parse_header(fx.data)
            pristine_chunks = [
                c for c in reader.iterate_chunks(fx.data, header) if hasattr(c, "crc32")
            ]
            verdict = reader.verify_chunk(pristine_chunks[target])
            if verdict.ok and verdict.mode is reader.CrcMode.OVER_COMPRESSED:
                pristine_mode_ok += 1
            flipped = corrupt(
                fx.data,
                CorruptionSite.PAYLOAD_BYTE_FLIP,
                chunk=target,
                offset=rng.randrange(deflate),
            )
            bad_chunks = [
                c for c in reader.iterate_chunks(flipped, header) if hasattr(c, "crc32")
            ]
            if not reader.verify_chunk(bad_chunks[target]).ok:
                detected += 1
        assert detected == 100, f"only {detected}/100 flips detected"
        assert pristine_mode_ok == 100, f"only {pristine_mode_ok}/100 pristine OverCompressed"


# --- 5: wraparound ordering ---------------------------------------------------------


def test_criterion_05_wraparound_order():
    with criterion(5, "3x-capacity wrap: contiguous increasing tail, offset order != index order"):
        rng = random.Random(0xC5)
        size = 8 * 1024
        config = WriterConfig(
            fixed_size_override=size,
            timestamp_ticks=133_000_000_000_000_000,
            base64_blob_size=64,
        )
        batches = [
            [
                {
                    "ver": "4.0",
                    "name": f"Wrap.E{i}",
                    "data": {"pad": rng.randbytes(150).hex()},
                }
            ]
            for i in range(90)
        ]
        fx = build_fixture(config, batches)
        capacity = size - RbsVersion.V8.header_len
        total_written = sum(p.length for p in fx.placements)
        assert total_written >= 3 * capacity, "fixture does not overfill 3x"
        assert fx.wrapped

        result = reader.read_file(fx.data)
        indices = [r.provenance.chunk_index for r in result.records]
        assert indices, "nothing recovered"
        assert all(b - a in (0, 1) for a, b in zip(indices, indices[1:]))
        assert sorted(set(indices)) == list(range(min(indices), max(indices) + 1))
        assert max(indices) == 89  # tail ends at the newest chunk

        survivors = fx.surviving
        by_offset = [p.chunk_index for p in sorted(survivors, key=lambda p: p.offset)]
        by_index = sorted(by_offset)
        assert by_offset != by_index, "no reordering was exercised"
        assert set(indices) == set(by_index)


# --- 6: catalog conformance, every Table-4 row --------------------------------------

_TABLE4_ROWS = [
    # (name, category, source file-type code)
    ("Census.OS", "OsAppLifecycle", 0x03),
    ("Microsoft.Windows.Inventory.Core.InventoryApplicationAdd", "OsAppLifecycle", 0x01),
    ("Microsoft.Windows.Inventory.Core.InventoryApplicationRemove", "OsAppLifecycle", 0x01),
    ("Microsoft.Windows.Kernel.Power.OSStateChange", "OsAppLifecycle", 0x01),
    ("Census.Hardware", "OsAppLifecycle", 0x03),
    ("Census.Storage", "OsAppLifecycle", 0x03),
    ("Census.Memory", "OsAppLifecycle", 0x03),
    ("Census.Processor", "OsAppLifecycle", 0x03),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousPhysicalDiskInfoAdd",
        "HardwareDevice",
        0x01,
    ),
    ("Microsoft.Windows.Inventory.Core.InventoryDevicePnpAdd", "HardwareDevice", 0x01),
    ("Microsoft.Windows.Inventory.Core.InventoryDevicePnpRemove", "HardwareDevice", 0x01),
    ("Microsoft.Windows.Inventory.Core.InventoryDeviceContainerAdd", "HardwareDevice", 0x01),
    ("Microsoft.Windows.Inventory.Core.InventoryDeviceContainerRemove", "HardwareDevice", 0x01),
    ("Microsoft.Windows.Inventory.Core.InventoryDriverPackageAdd", "HardwareDevice", 0x01),
    ("Win32kTraceLogging.AppInteractivitySummary", "ProcessExecution", 0x01),
    ("Win32kTraceLogging.PostUpdateUseInfo", "ProcessExecution", 0x01),
    (
        "Microsoft.Windows.Narrator.Asimov.NarratorCommandGeneratedStart",
        "ProcessExecution",
        0x01,
    ),
    ("Microsoft.Windows.HangReporting.AppHangEvent", "ProcessExecution", 0x01),
    ("Microsoft.OneDrive.Sync.Updater.ComponentInstallState", "ProcessExecution", 0x01),
    ("Microsoft.Windows.Skype.Host.UserLoggedIn", "ProcessExecution", 0x00),
    ("Microsoft-Windows-Store.StoreLaunching", "ProcessExecution", 0x00),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousMbrDiskAdd",
        "BootSectorPartition",
        0x01,
    ),
    (
        "Microsoft.Windows.Inventory.General.InventoryMiscellaneousGptDiskAdd",
        "BootSectorPartition",
        0x01,
    ),
    # dual listing: the power-state event appears under both the lifecycle
    # and boot-sector properties; the catalog stores it once (lifecycle) and
    # records the second listing in its notes.
    ("Microsoft.Windows.Kernel.Power.OSStateChange", "BootSectorPartition", 0x01),
]


def test_criterion_06_catalog_conformance():
    with criterion(6, f"catalog conformance, all {len(_TABLE4_ROWS)} table rows"):
        dual_name = "Microsoft.Windows.Kernel.Power.OSStateChange"
        rows_checked = 0
        for name, category_value, source_code in _TABLE4_ROWS:
            entry = catalog.lookup(name)
            assert entry is not None, f"missing from catalog: {name}"
            assert expected_source(name) is RbsFileType(source_code), name
            if name == dual_name and category_value == "BootSectorPartition":
                assert "BootSectorPartition" in entry.notes
            else:
                assert classify(name) is PropertyCategory(category_value), name
            rows_checked += 1
        assert rows_checked == len(_TABLE4_ROWS) == 24
        names = {row[0] for row in _TABLE4_ROWS}
        assert len(names) == 23
        categories = {row[1] for row in _TABLE4_ROWS}
        assert len(categories) == 4
        sources = {row[2] for row in _TABLE4_ROWS}
        assert sources == {0x00, 0x01, 0x03}


# --- 7: carving 50 plants in 100 MiB, < 30 s ----------------------------------------


def test_criterion_07_carving_100mib():
    with criterion(7, "carve 50/50 plants from 100 MiB, 0 false positives, bytes identical"):
        rng = random.Random(0xC7)
        era = SizeEra.LEGACY_1507
        store_size = fixed_size_bytes(RbsVersion.V3, RbsFileType.REALTIME, era=era)
        image_size = 100 * 1024 * 1024
        window = carve.DEFAULT_WINDOW_SIZE

        stores = []
        for i in range(50):
            fx = build_fixture(
                WriterConfig(
                    version=RbsVersion.V3,
                    file_type=RbsFileType.REALTIME,
                    era=era,
                    timestamp_ticks=131_000_000_000_000_000 + i,
                    seed=i,
                ),
                [[{"ver": "4.0", "name": f"Plant.{i}", "data": {"i": i}}]],
            )
            assert len(fx.data) == store_size
            stores.append(fx.data)

        # window-straddling offsets first, then random non-overlapping fills
        offsets = [window - 3, 2 * window - 17, 3 * window - 40, 4 * window - 66]
        while len(offsets) < 50:
            cand = rng.randrange(0, image_size - store_size)
            if all(
                cand + store_size <= o or o + store_size <= cand for o in offsets
            ):
                offsets.append(cand)
        plants = sorted(zip(offsets, stores))

        img = bytearray(rng.randbytes(image_size))
        for offset, data in plants:
            img[offset : offset + len(data)] = data
        image = bytes(img)

        start = time.perf_counter()
        hits = list(carve.scan(io.BytesIO(image), era=era))
        assert [h.offset for h in hits] == [o for o, _ in plants]  # 0 FP, 0 misses
        for hit, (offset, data) in zip(hits, plants):
            assert hit.confidence is carve.CarveConfidence.HIGH
            out = carve.extract(io.BytesIO(image), hit)
            assert not out.padded
            assert out.data == data
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0


# --- 8: FILETIME epoch golden + monotonicity ----------------------------------------

_INSTANT_RE = re.compile(
    r"^\+?(\d{4,})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{7}))?Z$"
)


def _instant_key(iso: str) -> tuple:
    m = _INSTANT_RE.match(iso)
    assert m, iso
    frac = m.group(7) or "0"
    return tuple(int(g) for g in m.groups()[:6]) + (int(frac),)


def test_criterion_08_filetime():
    with criterion(8, "FILETIME epoch constant vs calendar oracle; 10^4-pair monotonicity"):
        # oracle: count days 1601->1970 by explicit Gregorian rules, inside
        # the test, sharing nothing with the library implementation
        oracle_ticks = reference_epoch_offset_seconds() * 10_000_000
        assert oracle_ticks == 116_444_736_000_000_000
        assert filetime_from_unix(0) == oracle_ticks
        assert filetime_to_iso(116_444_736_000_000_000) == "1970-01-01T00:00:00Z"

        rng = random.Random(0xC8)
        for _ in range(10_000):
            a = rng.randrange(0, 1 << 63)
            b = rng.randrange(0, 1 << 63)
            if a == b:
                continue
            lo, hi = (a, b) if a < b else (b, a)
            assert _instant_key(filetime_to_iso(lo)) < _instant_key(filetime_to_iso(hi))


# --- 9: extractor fidelity ------------------------------------------------------------


def test_criterion_09_extractor_fidelity():
    with criterion(9, "disk-identity golden + 512-byte MBR round trip (Base64 and hex)"):
        rng = random.Random(0xC9)
        sector = bytearray(rng.randbytes(512))
        sector[510:512] = b"\x55\xaa"
        sector = bytes(sector)
        records = [
            {
                "ver": "4.0",
                "name": extract.DISK_INVENTORY_EVENT,
                "time": "2019-03-04T05:06:07.1234567Z",
                "data": {
                    "DeviceId": "\\\\.\\PHYSICALDRIVE0",
                    "SerialNumber": "S3YBNB0K100915R",
                    "Index": 0,
                    "Size": "1000202273280",
                    "NumPartitions": 3,
                    "BytesPerSector": 512,
                    "MediaType": "SSD",
                },
            },
            {
                "ver": "4.0",
                "name": extract.MBR_EVENT,
                "data": {"DeviceId": "d0", "Mbr": base64.b64encode(sector).decode()},
            },
            {
                "ver": "4.0",
                "name": extract.MBR_EVENT,
                "data": {"DeviceId": "d1", "Mbr": sector.hex()},
            },
        ]
        fx = build_fixture(
            WriterConfig(
                fixed_size_override=16 * 1024, timestamp_ticks=132_000_000_000_000_000
            ),
            [records],
        )
        result = reader.read_file(fx.data)
        assert result.report.clean

        disk = extract.extract_disk_inventory(result.records[0])
        assert disk.serial_number == "S3YBNB0K100915R"
        assert disk.size_bytes == 1000202273280
        assert disk.media_type == "SSD"

        b64_blob = extract.extract_boot_sector(result.records[1])
        assert b64_blob.sector == sector
        assert b64_blob.encoding is extract.BlobEncoding.BASE64
        assert b64_blob.mbr_signature_valid is True

        hex_blob = extract.extract_boot_sector(result.records[2])
        assert hex_blob.sector == sector
        assert hex_blob.encoding is extract.BlobEncoding.HEX
        assert hex_blob.mbr_signature_valid is True


# --- 10: throughput sanity, 16 MiB store -> timeline < 2 s ----------------------------


@pytest.fixture(scope="session")
def normal_store_16mib():
    """Full-size Events_Normal-shaped fixture, filled past 80% capacity."""
    rng = random.Random(0xC10)
    size = fixed_size_bytes(RbsVersion.V8, RbsFileType.NORMAL)
    assert size == 16 * 1024 * 1024
    capacity = size - RbsVersion.V8.header_len

    import json as _json
    import zlib as _zlib

    def make_batch(base: int) -> list[dict]:
        batch = []
        for i in range(20):
            n = base + i
            name = "Census.OS" if n % 10 == 0 else f"Perf.Event{n % 7}"
            batch.append(
                {
                    "ver": "4.0",
                    "name": name,
                    "time": f"2024-{1 + n // 28 % 12:02d}-{1 + n % 28:02d}"
                    f"T{n % 24:02d}:{n % 60:02d}:{(n * 7) % 60:02d}Z",
                    "data": {"pad": rng.randbytes(1024).hex()},
                }
            )
        return batch

    sample = make_batch(0)
    deflater = _zlib.compressobj(6, _zlib.DEFLATED, -_zlib.MAX_WBITS)
    est = len(
        deflater.compress("".join(_json.dumps(r, separators=(",", ":")) for r in sample).encode())
        + deflater.flush()
    ) + CHUNK_HEADER_LEN + 256
    n_batches = int(capacity * 0.90 / est)
    batches = [make_batch(b * 20) for b in range(n_batches)]
    fx = build_fixture(
        WriterConfig(
            version=RbsVersion.V8,
            file_type=RbsFileType.NORMAL,
            timestamp_ticks=133_500_000_000_000_000,
        ),
        batches,
    )
    assert not fx.wrapped
    fill = sum(p.length for p in fx.placements) / capacity
    assert fill >= 0.8, f"fixture only {fill:.0%} full"
    return fx


def test_criterion_10_throughput(normal_store_16mib, tmp_path):
    path = tmp_path / "Events_Normal.rbs"
    path.write_bytes(normal_store_16mib.data)
    expected_records = sum(p.record_count for p in normal_store_16mib.placements)
    with criterion(10, "16 MiB store: header -> timeline < 2 s"):
        start = time.perf_counter()
        result = reader.read_file(path)
        entries = timeline.build_timeline(result.records)
        elapsed = time.perf_counter() - start
        assert result.report.clean
        assert len(entries) == expected_records
        stamps = [e.timestamp_utc for e in entries if e.timestamp_utc]
        assert stamps == sorted(stamps)
        assert elapsed < 2.0, f"took {elapsed:.2f}s"
