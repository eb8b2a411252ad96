"""Bit-exact serialization of named arrays (DBT1 container format).

Layout, all little-endian: 4-byte magic ``DBT1``, then one record per entry
until end of file. Record: name length (u32), name bytes (ASCII), dtype code
(u8: 0=float32, 1=float64, 2=uint8), ndim (u32), one u32 per dimension, raw
row-major data. Used for bursts, model checkpoints, and detection maps.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = [
    "ContainerError",
    "ContainerFormatError",
    "ContainerCorruptionError",
    "save_container",
    "load_container",
]

MAGIC = b"DBT1"

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("<f8"): 1,
    np.dtype("u1"): 2,
}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}


class ContainerError(Exception):
    """Base class for container serialization failures."""


class ContainerFormatError(ContainerError):
    """The payload is not a valid container (bad magic, dtype code, name)."""


class ContainerCorruptionError(ContainerError):
    """The payload ends mid-record; the file is truncated or damaged."""


def _check_name(name: str) -> bytes:
    if not name:
        raise ValueError("entry names must be non-empty")
    try:
        raw = name.encode("ascii")
    except UnicodeEncodeError as exc:
        raise ValueError(f"entry name {name!r} is not ASCII") from exc
    return raw


def save_container(path, tensors: Mapping[str, np.ndarray]) -> None:
    """Write ``tensors`` to ``path``; ``load_container`` restores them bit-exactly."""
    records = []
    for name, value in tensors.items():
        raw_name = _check_name(name)
        arr = np.ascontiguousarray(value)
        if arr.dtype not in _DTYPE_CODES:
            raise ValueError(
                f"entry {name!r} has unsupported dtype {arr.dtype}; "
                "supported: float32, float64, uint8"
            )
        code = _DTYPE_CODES[arr.dtype]
        header = struct.pack("<I", len(raw_name)) + raw_name
        header += struct.pack("<BI", code, arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        records.append(header + arr.tobytes())
    Path(path).write_bytes(MAGIC + b"".join(records))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerCorruptionError(
                f"truncated container: needed {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.data)


def load_container(path) -> dict[str, np.ndarray]:
    """Read a container written by :func:`save_container`.

    Raises :class:`ContainerFormatError` on malformed structure and
    :class:`ContainerCorruptionError` on truncation.
    """
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ContainerFormatError(f"bad magic {data[:4]!r}; expected {MAGIC!r}")
    reader = _Reader(data)
    reader.pos = 4
    out: dict[str, np.ndarray] = {}
    while not reader.exhausted:
        (name_len,) = struct.unpack("<I", reader.take(4))
        if name_len == 0:
            raise ContainerFormatError("entry with empty name")
        try:
            name = reader.take(name_len).decode("ascii")
        except UnicodeDecodeError as exc:
            raise ContainerFormatError("entry name is not ASCII") from exc
        if name in out:
            raise ContainerFormatError(f"duplicate entry name {name!r}")
        code, ndim = struct.unpack("<BI", reader.take(5))
        if code not in _CODE_DTYPES:
            raise ContainerFormatError(f"unknown dtype code {code} for entry {name!r}")
        dims = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        dtype = _CODE_DTYPES[code]
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        payload = reader.take(count * dtype.itemsize)
        out[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    return out
