"""Binary PGM (P5) reading and writing."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse a P5 image; returns uint8 (maxval < 256) or uint16 array of shape (height, width)."""
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMError("truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise PGMError(f"not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PGMError(f"invalid PGM geometry {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = width * height * dtype.itemsize
    raster = data[pos : pos + need]
    if len(raster) != need:
        raise PGMError(f"PGM raster truncated: {len(raster)} of {need} bytes")
    img = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return img.astype(np.uint16) if maxval > 255 else img.copy()


def encode_pgm(image) -> bytes:
    """Encode an 8-bit image (values are clipped to 0..255 and rounded)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise PGMError(f"PGM needs a 2-D image, got shape {arr.shape}")
    raster = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    h, w = raster.shape
    return b"P5\n%d %d\n255\n" % (w, h) + raster.tobytes()


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, image) -> None:
    from .nn.io import write_atomic

    write_atomic(path, encode_pgm(image))


def normalize_to_u8(image) -> np.ndarray:
    """Min-max stretch to 0..255; a constant image maps to zeros."""
    arr = np.asarray(image, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return np.zeros(arr.shape, dtype=np.uint8)
    return np.rint((arr - lo) * (255.0 / (hi - lo))).astype(np.uint8)
