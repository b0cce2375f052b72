"""Flat parameter checkpoint container.

Layout (all integers little-endian)::

    b"PTTCKPT" | version:u8 | count:u32
    count x ( name_len:u16 | name:utf-8 | ndim:u8 | dims:u32*ndim | data:f64*prod(dims) )

Records are written in sorted-name order so identical parameter sets produce
identical bytes.
"""

from __future__ import annotations

import os
import struct
from typing import Dict, Mapping

import numpy as np

MAGIC = b"PTTCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<BI", VERSION, len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(getattr(arrays[name], "data", arrays[name]), dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def loads(buf: bytes) -> Dict[str, np.ndarray]:
    if not buf.startswith(MAGIC):
        raise CheckpointError("not a checkpoint: bad magic")
    off = len(MAGIC)
    version, count = struct.unpack_from("<BI", buf, off)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off += 5
    out: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off:off + nlen].decode("utf-8")
            off += nlen
            (ndim,) = struct.unpack_from("<B", buf, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape)
            off += 8 * size
            out[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
    if off != len(buf):
        raise CheckpointError(f"{len(buf) - off} trailing bytes after {count} records")
    return out


def save(path, arrays: Mapping[str, np.ndarray]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps(arrays))
    os.replace(tmp, path)


def load(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return loads(fh.read())


def assign(params: Mapping, arrays: Mapping[str, np.ndarray], strict: bool = True) -> None:
    """Copy stored arrays into the matching parameters in place."""
    for name, p in params.items():
        if name not in arrays:
            if strict:
                raise CheckpointError(f"checkpoint lacks parameter {name!r}")
            continue
        if arrays[name].shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {arrays[name].shape}, model {p.data.shape}")
        p.data[...] = arrays[name]
