#!/usr/bin/env python3
"""Hand-packs the golden wire fixtures, byte by byte.

Deliberately independent of the C++ codec: these bytes pin the documented
layout (docs/formats.md), not whatever the implementation happens to emit.
Re-run to regenerate the .bin files next to this script.
"""
import struct
from pathlib import Path

HERE = Path(__file__).parent

ETHERTYPE = 0x88B5
DST = bytes.fromhex("ffffffffffff")
SRC = bytes.fromhex("02504f4e0001")


def encap(kind: int, seq: int) -> bytes:
    # dst(6) src(6) ethertype(2, BE) kind(1) seq(4, BE)
    return DST + SRC + struct.pack(">HBI", ETHERTYPE, kind, seq)


def downstream_golden() -> bytes:
    # frame_seq=7, one allocation {alloc_id=1026, flags=1, start=38400, size=128},
    # no payload.
    hlend = struct.pack(">H", 1 << 5)  # bwmap_len:11 | pad:5
    alloc = struct.pack(">HHHH", (1026 << 2) | 1, 38400, 128, 0)
    return encap(0, 7) + hlend + alloc


def dbru_golden() -> bytes:
    # alloc_id=5000, occupancy=1500 words, created_at=123456789 ns.
    body = struct.pack(">H", 5000) + (1500).to_bytes(3, "big") + struct.pack(">Q", 123456789)
    return encap(1, 0) + body


for name, data in [("downstream_golden.bin", downstream_golden()),
                   ("dbru_golden.bin", dbru_golden())]:
    (HERE / name).write_bytes(data)
    print(f"{name}: {len(data)} bytes  {data.hex()}")
