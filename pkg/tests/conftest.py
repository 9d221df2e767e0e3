"""Shared fixtures and independent reference implementations.

The oracles here deliberately avoid the code paths they are used to check:
CRC-32 is computed from a locally built table instead of zlib, and FILETIME
conversion is done with explicit Gregorian day-counting instead of datetime
arithmetic. If the library and an oracle ever agree by accident, they would
have to share a bug across two unrelated algorithms.
"""

from __future__ import annotations

import json

import pytest

from rbskit.writer import WriterConfig, build_fixture

# One verdict line per acceptance criterion, echoed into the terminal
# summary so they are visible even with output capture on.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class ReferenceCrc32:
    """Table-driven CRC-32 (reflected 0x04C11DB7), independent of zlib."""

    def __init__(self) -> None:
        table = []
        for n in range(256):
            c = n
            for _ in range(8):
                c = (c >> 1) ^ 0xEDB88320 if c & 1 else c >> 1
            table.append(c)
        self.table = table

    def compute(self, data: bytes) -> int:
        crc = 0xFFFFFFFF
        for byte in data:
            crc = self.table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
        return crc ^ 0xFFFFFFFF


def reference_epoch_offset_seconds() -> int:
    """Seconds between 1601-01-01 and 1970-01-01 by explicit day counting."""
    def leap(y: int) -> bool:
        return y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)

    days = 0
    for year in range(1601, 1970):
        days += 366 if leap(year) else 365
    return days * 86400


def reference_filetime_to_unix(ticks: int) -> float:
    """FILETIME → Unix seconds via the day-counting oracle."""
    return ticks / 10_000_000 - reference_epoch_offset_seconds()


@pytest.fixture(scope="session")
def ref_crc32() -> ReferenceCrc32:
    return ReferenceCrc32()


def make_record(name: str, time: str | None = "2022-04-05T06:07:08.1234567Z", **extra):
    record = {"ver": "4.0", "name": name}
    if time is not None:
        record["time"] = time
    record.setdefault("data", extra.pop("data", {"Marker": name}))
    record.update(extra)
    return record


def simple_batches(n_batches: int = 3, per_batch: int = 2):
    out = []
    k = 0
    for _ in range(n_batches):
        batch = []
        for _ in range(per_batch):
            batch.append(
                make_record(
                    f"Test.Event{k}",
                    time=f"2022-04-05T06:{k // 60:02d}:{k % 60:02d}Z",
                    data={"k": k},
                )
            )
            k += 1
        out.append(batch)
    return out


@pytest.fixture()
def small_fixture():
    """A pristine 3-chunk/6-record fixture small enough for fast tests."""
    config = WriterConfig(
        fixed_size_override=64 * 1024,
        timestamp_ticks=133_100_000_000_000_000,
        seed=11,
    )
    batches = simple_batches(3, 2)
    return build_fixture(config, batches), batches


def json_span_oracle(data: bytes):
    """Reference boundary finder built on json.JSONDecoder.raw_decode.

    Only meaningful for inputs whose balanced spans are genuinely valid
    JSON; used to check the scanner against an unrelated implementation.
    """
    decoder = json.JSONDecoder()
    text = data.decode("utf-8")
    # raw_decode works on str indices; map back to byte offsets as we go.
    spans = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch not in "{[":
            i += 1
            continue
        try:
            value, end = decoder.raw_decode(text, i)
        except ValueError:
            i += 1
            continue
        start_b = len(text[:i].encode("utf-8"))
        end_b = len(text[:end].encode("utf-8"))
        spans.append((start_b, end_b))
        i = end
    return spans
