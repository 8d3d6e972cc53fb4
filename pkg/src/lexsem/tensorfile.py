"""Binary tensor container ("SEMT" files).

One file holds float32 matrices keyed by (entry id, chunk index).  The same
container stores precomputed per-chunk embeddings, model parameters
(flattened, with ids naming the parameter) and scaler statistics.

Layout, little-endian throughout:

    magic   4 bytes  b"SEMT"
    version u32
    dim     u32      columns of every matrix in the file
    count   u32      number of entries
    entry   repeated count times:
        id_len  u16
        id      id_len bytes, UTF-8
        chunk   u32
        rows    u32
        values  rows * dim float32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MAGIC = b"SEMT"
VERSION = 1

_HEADER = struct.Struct("<4sIII")
_ID_LEN = struct.Struct("<H")
_ENTRY_HEAD = struct.Struct("<II")


def write_entries(
    path: str,
    dimension: int,
    entries: Iterable[tuple[str, int, np.ndarray]],
) -> int:
    """Write (id, chunk_index, rows x dimension matrix) entries; returns count."""
    if dimension <= 0:
        raise ValueError("dimension must be positive")
    items = list(entries)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dimension, len(items)))
        for entry_id, chunk_index, values in items:
            mat = np.ascontiguousarray(values, dtype="<f4")
            if mat.ndim == 1:
                mat = mat.reshape(-1, 1) if dimension == 1 else mat.reshape(1, -1)
            if mat.ndim != 2 or mat.shape[1] != dimension:
                raise ValueError(
                    f"entry {entry_id!r}: shape {values.shape} incompatible with dimension {dimension}"
                )
            raw = entry_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"entry id too long: {entry_id!r}")
            fh.write(_ID_LEN.pack(len(raw)))
            fh.write(raw)
            fh.write(_ENTRY_HEAD.pack(chunk_index, mat.shape[0]))
            fh.write(mat.tobytes())
    return len(items)


def read_entries(path: str) -> tuple[int, list[tuple[str, int, np.ndarray]]]:
    """Read a container; returns (dimension, [(id, chunk_index, float32 matrix)])."""
    with open(path, "rb") as fh:
        data = fh.read()
    dimension, raw = _parse_header(data)
    return dimension, list(raw)


def iter_entries(data: bytes) -> Iterator[tuple[str, int, np.ndarray]]:
    _, raw = _parse_header(data)
    yield from raw


def _parse_header(data: bytes):
    if len(data) < _HEADER.size:
        raise FormatError("data.truncated", 0, "file shorter than header")
    magic, version, dimension, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError("data.bad_magic", 0, f"magic {magic!r}")
    if version != VERSION:
        raise FormatError("data.bad_version", 4, f"version {version}")
    if dimension == 0:
        raise FormatError("data.bad_header", 8, "dimension is zero")

    def gen():
        offset = _HEADER.size
        for _ in range(count):
            if offset + _ID_LEN.size > len(data):
                raise FormatError("data.truncated", offset, "entry id length cut off")
            (id_len,) = _ID_LEN.unpack_from(data, offset)
            offset += _ID_LEN.size
            if offset + id_len + _ENTRY_HEAD.size > len(data):
                raise FormatError("data.truncated", offset, "entry header cut off")
            entry_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            chunk_index, rows = _ENTRY_HEAD.unpack_from(data, offset)
            offset += _ENTRY_HEAD.size
            payload = rows * dimension * 4
            if offset + payload > len(data):
                raise FormatError("data.truncated", offset, "entry payload cut off")
            mat = np.frombuffer(data, dtype="<f4", count=rows * dimension, offset=offset)
            offset += payload
            yield entry_id, chunk_index, mat.reshape(rows, dimension)
        if offset != len(data):
            raise FormatError("data.trailing", offset, f"{len(data) - offset} trailing bytes")

    return dimension, gen()


class FormatError(Exception):
    """Structural problem in a tensor container file."""

    def __init__(self, error_class: str, byte_offset: int, message: str):
        super().__init__(f"{error_class} at byte {byte_offset}: {message}")
        self.error_class = error_class
        self.byte_offset = byte_offset


@dataclass
class ValidationReport:
    ok: bool
    error_class: str | None
    byte_offset: int | None
    message: str
    dimension: int = 0
    entry_count: int = 0
    total_rows: int = 0


def validate_file(path: str) -> ValidationReport:
    """Check magic, version, structure, entry count and value finiteness."""
    with open(path, "rb") as fh:
        data = fh.read()
    entry_count = 0
    total_rows = 0
    dimension = 0
    offset = _HEADER.size
    try:
        dimension, gen = _parse_header(data)
        for entry_id, _, mat in gen:
            bad = ~np.isfinite(mat)
            if bad.any():
                flat = int(np.flatnonzero(bad.ravel())[0])
                value_offset = offset + _ID_LEN.size + len(entry_id.encode()) + _ENTRY_HEAD.size + 4 * flat
                raise FormatError("data.nonfinite", value_offset, f"entry {entry_id!r} holds a non-finite value")
            entry_count += 1
            total_rows += mat.shape[0]
            offset += _ID_LEN.size + len(entry_id.encode()) + _ENTRY_HEAD.size + mat.size * 4
    except FormatError as err:
        return ValidationReport(False, err.error_class, err.byte_offset, str(err), dimension, entry_count, total_rows)
    return ValidationReport(True, None, None, "ok", dimension, entry_count, total_rows)
