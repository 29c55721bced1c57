"""Binary dump format for grid arrays.

Layout (little endian):
    magic   4 bytes  b"HFLD"
    version u8       1
    d       u8
    counts  d * u64  per-axis array lengths
    r       f64
    h       f64
    data    f64 * prod(counts), C (row-major) order
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HFLD"
VERSION = 1


def save_array(path, values: np.ndarray, r: float, h: float) -> None:
    values = np.ascontiguousarray(values, dtype=float)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BB", VERSION, values.ndim))
        fh.write(struct.pack(f"<{values.ndim}Q", *values.shape))
        fh.write(struct.pack("<dd", r, h))
        fh.write(values.astype("<f8").tobytes(order="C"))


def load_array(path):
    """Return (values, r, h)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, d = struct.unpack("<BB", fh.read(2))
        if version != VERSION:
            raise ValueError(f"unsupported version {version}")
        counts = struct.unpack(f"<{d}Q", fh.read(8 * d))
        r, h = struct.unpack("<dd", fh.read(16))
        n = int(np.prod(counts))
        data = np.frombuffer(fh.read(8 * n), dtype="<f8", count=n)
    return data.reshape(counts).copy(), r, h


def save_field(path, f) -> None:
    save_array(path, f.values, f.domain.r, f.domain.h)


def load_field(path, domain):
    from .grid import ScalarField

    values, r, h = load_array(path)
    if values.shape != domain.shape:
        raise ValueError(f"dump shape {values.shape} != domain shape {domain.shape}")
    return ScalarField(domain, values)
