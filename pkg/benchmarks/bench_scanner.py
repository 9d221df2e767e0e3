#!/usr/bin/env python3
"""Benchmark the JSON boundary scanner: compiled kernel vs pure Python.

The scanner is the one hot loop in the decode path that the stdlib cannot
cover (zlib and json are already C). This script builds a realistic payload
— concatenated telemetry-shaped records — and times both implementations.

Usage: python benchmarks/bench_scanner.py [--mib 16] [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import random
import statistics
import sys
import time

from rbskit import _scanner_py

try:
    from rbskit import _scanner
except ImportError:
    _scanner = None


def build_payload(target_bytes: int, seed: int = 42) -> bytes:
    rng = random.Random(seed)
    out = []
    size = 0
    i = 0
    while size < target_bytes:
        record = {
            "ver": "4.0",
            "name": f"Sample.Event{i % 23}",
            "time": f"2024-01-{1 + i % 28:02d}T{i % 24:02d}:00:00.{i % 10000000:07d}Z",
            "flags": rng.getrandbits(32),
            "appId": "W:0000" + rng.randbytes(8).hex(),
            "data": {
                "Payload": rng.randbytes(rng.randint(40, 400)).hex(),
                "Nested": {"a": [1, 2, {"b": 'quote " and \\ backslash'}]},
            },
        }
        blob = json.dumps(record, separators=(",", ":")).encode()
        out.append(blob)
        size += len(blob)
        i += 1
    return b"".join(out)


def bench(fn, data: bytes, repeat: int) -> tuple[float, int]:
    times = []
    n = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        spans = fn(data)
        times.append(time.perf_counter() - t0)
        n = len(spans)
    return min(times), n


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--mib", type=float, default=16.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    data = build_payload(int(args.mib * 1024 * 1024))
    mib = len(data) / (1024 * 1024)
    print(f"payload: {mib:.1f} MiB of concatenated records")

    t_py, n_py = bench(_scanner_py.scan_json_boundaries, data, args.repeat)
    print(f"pure python : {t_py * 1000:8.1f} ms  {mib / t_py:8.1f} MiB/s  ({n_py} records)")

    if _scanner is None:
        print("compiled    : not built (pip install with Cython available)")
        return 0
    t_c, n_c = bench(_scanner.scan_json_boundaries, data, args.repeat)
    print(f"compiled    : {t_c * 1000:8.1f} ms  {mib / t_c:8.1f} MiB/s  ({n_c} records)")
    if n_py != n_c:
        print("MISMATCH: implementations disagree on record count", file=sys.stderr)
        return 1
    print(f"speedup     : {t_py / t_c:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
