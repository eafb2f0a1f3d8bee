"""Cyclic dyadic Fast Hough Transform on square power-of-two images.

Images are 2-D arrays indexed ``[row y, column x]``.  The Hough image of the
canonical transform (mostly horizontal lines going down to the right) is
indexed ``[start row s, shift t]``: the pattern ``(s, t)`` visits the cells
``((s + indentation(x, t)) mod n, x)`` for every column ``x``.

Any array with leading batch axes ``(..., n, n)`` is accepted by the
transforms; the last two axes are the image.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Quadrant",
    "OpCounter",
    "check_image",
    "indentation",
    "indentation_matrix",
    "pattern",
    "flip_rows",
    "fht_forward",
    "fht_transposed",
    "fht_quadrant",
    "fht_quadrant_adjoint",
]


class Quadrant(enum.Enum):
    """Line-orientation family handled by a single transform pass."""

    HORIZONTAL_DOWN = "horizontal_down"
    HORIZONTAL_UP = "horizontal_up"
    VERTICAL_RIGHT = "vertical_right"
    VERTICAL_LEFT = "vertical_left"

    @classmethod
    def parse(cls, value) -> "Quadrant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for q in cls:
            if key in (q.value, q.name.lower(), "".join(w[0] for w in q.value.split("_"))):
                return q
        raise ValueError(f"unknown quadrant {value!r}")


@dataclass
class OpCounter:
    """Accumulates the number of scalar additions done by :func:`fht_forward`."""

    additions: int = 0


def _log2_side(n: int) -> int:
    p = int(n).bit_length() - 1
    if n < 1 or (1 << p) != n:
        raise ValueError(f"image side must be a power of two, got {n}")
    return p


def check_image(image, *, name="image") -> np.ndarray:
    """Validate a (batch of) square power-of-two images and fix its dtype.

    Integer input is promoted to int64 so accumulation stays exact.  float32
    is preserved (fast mode for the network); everything else becomes float64.
    """
    arr = np.asarray(image)
    if arr.ndim < 2:
        raise ValueError(f"{name} must be at least 2-D, got shape {arr.shape}")
    h, w = arr.shape[-2:]
    if h != w:
        raise ValueError(f"{name} must be square, got {h}x{w}")
    _log2_side(h)
    if arr.dtype == np.bool_ or np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.int64, copy=False)
    if arr.dtype == np.float32:
        return arr
    out = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


def indentation(x: int, t: int, p: int) -> int:
    """Row offset of column ``x`` in the dyadic pattern with shift ``t``.

    ``H(x, t) = sum_r t_r * round(2**r * x / (2**p - 1))`` where ``t_r`` are
    the binary digits of ``t``.  Rounding is to nearest; the denominator is
    odd so halves never occur and the sum is evaluated in exact integers.
    """
    n = 1 << p
    if not (0 <= x < n and 0 <= t < n):
        raise ValueError(f"x={x}, t={t} out of range for p={p}")
    if p == 0:
        return 0
    d = n - 1
    total = 0
    for r in range(p):
        if (t >> r) & 1:
            total += (2 * (x << r) + d) // (2 * d)
    return total


def indentation_matrix(p: int) -> np.ndarray:
    """``M[x, t] = indentation(x, t, p)`` for all columns and shifts."""
    n = 1 << p
    return np.array([[indentation(x, t, p) for t in range(n)] for x in range(n)], dtype=np.int64)


def pattern(t: int, s: int, p: int) -> list[tuple[int, int]]:
    """Cells ``(column x, row y)`` of the pattern starting at row ``s`` with shift ``t``."""
    n = 1 << p
    if not (0 <= s < n and 0 <= t < n):
        raise ValueError(f"pattern (t={t}, s={s}) out of range for p={p}")
    return [(x, (s + indentation(x, t, p)) % n) for x in range(n)]


def flip_rows(image) -> np.ndarray:
    """Reverse the row order (last-but-one axis)."""
    return np.flip(np.asarray(image), axis=-2).copy()


def fht_forward(image, *, counter: OpCounter | None = None) -> np.ndarray:
    """Canonical cyclic FHT: ``out[s, t] = sum_x image[(s + H(x, t)) % n, x]``.

    Bottom-up butterfly: column strips of width ``w`` holding partial Hough
    images with ``w`` shifts are merged pairwise into strips of width ``2w``.
    Shift ``t`` of the merged strip uses shift ``t // 2`` of both halves, the
    right half entering ``t - t // 2`` rows lower.  Each stage does ``n**2``
    additions per image, ``n**2 * log2(n)`` in total.
    """
    img = check_image(image)
    n = img.shape[-1]
    lead = img.shape[:-2]
    # (..., strip, shift, row) with rows contiguous; start with one strip per column
    h = np.swapaxes(img, -1, -2)[..., None, :]
    w = 1
    while w < n:
        left = h[..., 0::2, :, :]
        right = h[..., 1::2, :, :]
        # rows of the right half repeated so any roll by d <= w is a contiguous slice
        doubled = np.empty(right.shape[:-1] + (n + w + 1,), right.dtype)
        doubled[..., :n] = right
        doubled[..., n:] = right[..., : w + 1]
        *outer, sk, sr = doubled.strides
        # rolled[..., k, e, r] = doubled[..., k, k + e + r]: row k rolled up by k + e
        rolled = np.ndarray(doubled.shape[:-1] + (2, n), doubled.dtype, doubled, 0, (*outer, sk + sr, sr, sr))
        h = (left[..., None, :] + rolled).reshape(left.shape[:-2] + (2 * w, n))
        if counter is not None:
            counter.additions += h.size
        w *= 2
    return np.ascontiguousarray(np.swapaxes(h.reshape(*lead, n, n), -1, -2))


def fht_transposed(image) -> np.ndarray:
    """Adjoint of :func:`fht_forward`, computed as flip . FHT . flip."""
    return flip_rows(fht_forward(flip_rows(check_image(image))))


def _swap_xy(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.swapaxes(a, -1, -2))


def fht_quadrant(image, quadrant=Quadrant.HORIZONTAL_DOWN, transposed: bool = False) -> np.ndarray:
    """Hough transform for one orientation family, or its adjoint.

    ``HORIZONTAL_UP`` is the row-flipped conjugate of the canonical transform
    (pattern offsets subtracted instead of added).  The vertical families run
    the horizontal ones on the image with rows and columns exchanged, so the
    forward output stays in Hough coordinates.  With ``transposed=True`` the
    exact adjoint is returned; its output is in image coordinates.
    """
    q = Quadrant.parse(quadrant)
    img = check_image(image)
    if q in (Quadrant.VERTICAL_RIGHT, Quadrant.VERTICAL_LEFT):
        inner = Quadrant.HORIZONTAL_DOWN if q is Quadrant.VERTICAL_RIGHT else Quadrant.HORIZONTAL_UP
        if transposed:
            return _swap_xy(fht_quadrant(img, inner, transposed=True))
        return fht_quadrant(_swap_xy(img), inner)
    if q is Quadrant.HORIZONTAL_DOWN:
        return fht_transposed(img) if transposed else fht_forward(img)
    # (F A F)^T = F A^T F = A
    if transposed:
        return fht_forward(img)
    return flip_rows(fht_forward(flip_rows(img)))


def fht_quadrant_adjoint(image, quadrant=Quadrant.HORIZONTAL_DOWN, transposed: bool = False) -> np.ndarray:
    """Adjoint of ``fht_quadrant(., quadrant, transposed)``."""
    return fht_quadrant(image, quadrant, transposed=not transposed)
