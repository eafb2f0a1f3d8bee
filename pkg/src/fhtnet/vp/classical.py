"""Non-learning vanishing point estimate: back-projected Hough image maximum."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..fht import Quadrant, fht_quadrant


class VPEstimate(NamedTuple):
    x: float
    y: float
    low_confidence: bool


def edge_filter(image, percentile: float = 90.0) -> np.ndarray:
    """Central-difference gradient magnitude, zeroed below the given percentile."""
    img = np.asarray(image, dtype=np.float64)
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    thr = np.percentile(mag, percentile)
    return np.where(mag > thr, mag, 0.0)


def pad_pow2(image) -> np.ndarray:
    """Zero-pad at the bottom/right to the next power-of-two square; coordinates are kept."""
    img = np.asarray(image, dtype=np.float64)
    side = 1
    while side < max(img.shape):
        side *= 2
    out = np.zeros((side, side))
    out[: img.shape[0], : img.shape[1]] = img
    return out


def backprojection_map(image, quadrants=(Quadrant.HORIZONTAL_DOWN,), prefilter: bool = False) -> np.ndarray:
    """``sum_q FHT_q^T(FHT_q(image))`` on the padded image, cropped back to the input size."""
    img = np.asarray(image, dtype=np.float64)
    src = edge_filter(img) if prefilter else img
    padded = pad_pow2(src)
    acc = sum(fht_quadrant(fht_quadrant(padded, q), q, transposed=True) for q in quadrants)
    return acc[: img.shape[0], : img.shape[1]]


def classical_vp(image, quadrants=(Quadrant.HORIZONTAL_DOWN,), prefilter: bool = False) -> VPEstimate:
    """Brightest pixel of the FHT / transposed-FHT composition.

    A flat accumulator (e.g. an empty image) yields ``(0, 0)`` by the
    row-major tie-break and is flagged ``low_confidence``.
    """
    acc = backprojection_map(image, quadrants, prefilter)
    r, c = np.unravel_index(int(np.argmax(acc)), acc.shape)
    return VPEstimate(float(c), float(r), bool(acc.max() == acc.min()))


def classical_candidates(image, quadrants=(Quadrant.HORIZONTAL_DOWN,), prefilter: bool = False, limit: int | None = None):
    """All pixels ordered by accumulator value (row-major tie-break), as ``(x, y)``."""
    acc = backprojection_map(image, quadrants, prefilter)
    order = np.argsort(-acc.ravel(), kind="stable")
    if limit is not None:
        order = order[:limit]
    rows, cols = np.unravel_index(order, acc.shape)
    return [(float(c), float(r)) for r, c in zip(rows, cols)]
