"""Binary field snapshots and CSV logs."""

from __future__ import annotations

import os
import struct

import numpy as np

from hypslab.hgeom import HyperbolicGrid

__all__ = ["SnapshotError", "MAGIC", "VERSION", "write_snapshot", "read_snapshot",
           "encode_snapshot", "decode_snapshot", "write_csv", "format_float"]

MAGIC = b"HSM1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdI")


class SnapshotError(ValueError):
    pass


def encode_snapshot(grid: HyperbolicGrid, fields: dict) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, grid.nr, grid.ntheta, grid.rmax, len(fields))]
    for name, arr in fields.items():
        a = np.asarray(arr)
        if a.shape != grid.shape:
            raise SnapshotError(f"field {name!r} has shape {a.shape}, grid is {grid.shape}")
        raw = name.encode("utf-8")
        kind = 1 if np.iscomplexobj(a) else 0
        dtype = "<c16" if kind else "<f8"
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", kind))
        parts.append(np.ascontiguousarray(a, dtype=dtype).tobytes())
    return b"".join(parts)


def decode_snapshot(data: bytes) -> tuple:
    """Return ``((nr, ntheta, rmax), fields)``; nothing is returned on any error."""
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, nr, nt, rmax, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (reader knows {VERSION})")
    pos = _HEADER.size
    fields = {}
    n = nr * nt
    for _ in range(count):
        if pos + 2 > len(data):
            raise SnapshotError("truncated field header")
        (ln,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + ln + 1 > len(data):
            raise SnapshotError("truncated field header")
        name = data[pos:pos + ln].decode("utf-8")
        kind = data[pos + ln]
        pos += ln + 1
        if kind not in (0, 1):
            raise SnapshotError(f"field {name!r}: unknown kind {kind}")
        dtype = "<c16" if kind else "<f8"
        size = n * (16 if kind else 8)
        if pos + size > len(data):
            raise SnapshotError(f"field {name!r}: truncated payload")
        fields[name] = np.frombuffer(data, dtype=dtype, count=n, offset=pos).reshape(nr, nt).copy()
        pos += size
    if pos != len(data):
        raise SnapshotError("trailing bytes after the last field")
    return (nr, nt, rmax), fields


def write_snapshot(fields: dict, path, grid: HyperbolicGrid) -> None:
    data = encode_snapshot(grid, fields)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_snapshot(path) -> tuple:
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read())


def format_float(x) -> str:
    return "%.17g" % float(x)


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format_float(x)


def write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the header")
        lines.append(",".join(_cell(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
