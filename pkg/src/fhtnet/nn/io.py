"""Binary model files.

Layout: magic ``b"FHTNN1\\n"``, uint32 blob count, then per blob a uint32
rank, ``rank`` uint32 dimensions and the float64 values, all little-endian.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"FHTNN1\n"


class ModelFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def dump_model(params) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(params))]
    for p in params:
        arr = np.asarray(p, dtype="<f8")
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def parse_model(data: bytes) -> list[np.ndarray]:
    if data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}", 0)
    pos = len(MAGIC)

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise ModelFormatError(f"truncated file while reading {what}", pos)
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4, "blob count"))
    params = []
    for i in range(count):
        (rank,) = struct.unpack("<I", take(4, f"rank of blob {i}"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of blob {i}"))
        size = int(np.prod(dims)) if rank else 1
        raw = take(8 * size, f"values of blob {i}")
        params.append(np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64))
    if pos != len(data):
        raise ModelFormatError(f"{len(data) - pos} trailing bytes", pos)
    return params


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(path, params) -> None:
    write_atomic(path, dump_model(params))


def load_model(path) -> list[np.ndarray]:
    return parse_model(Path(path).read_bytes())
