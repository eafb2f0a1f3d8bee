"""Blur corruption centred on the vanishing point."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .evaluate import evaluate, network_candidates


@dataclass(frozen=True)
class CorruptionSpec:
    rect_side: float
    blur_kernel_sigma: float | None = None  # defaults to rect_side / 6

    def __post_init__(self):
        if self.rect_side < 0:
            raise ValueError("rect_side must be non-negative")

    @property
    def sigma(self) -> float:
        return self.rect_side / 6 if self.blur_kernel_sigma is None else self.blur_kernel_sigma


def rect_bounds(vp, side: float, shape) -> tuple[int, int, int, int]:
    """``(row0, row1, col0, col1)`` of the square of ``side`` pixels centred on ``vp``, clipped."""
    h, w = shape
    half = side / 2
    x, y = vp
    r0 = int(np.clip(np.floor(y - half + 0.5), 0, h))
    r1 = int(np.clip(np.floor(y + half + 0.5), 0, h))
    c0 = int(np.clip(np.floor(x - half + 0.5), 0, w))
    c1 = int(np.clip(np.floor(x + half + 0.5), 0, w))
    return r0, r1, c0, c1


def blur_corrupt(image, vp, spec: CorruptionSpec) -> np.ndarray:
    """Gaussian-blur the square around ``vp``; pixels outside it are untouched.

    The blur is truncated at 3 sigma and reflects at the square's border, so
    the total intensity inside the square is preserved.
    """
    out = np.array(image, dtype=np.float64, copy=True)
    r0, r1, c0, c1 = rect_bounds(vp, spec.rect_side, out.shape)
    if r1 <= r0 or c1 <= c0 or spec.sigma <= 0:
        return out
    out[r0:r1, c0:c1] = gaussian_filter(out[r0:r1, c0:c1], spec.sigma, mode="reflect", truncate=3.0)
    return out


def corruption_sweep(model, dataset, sides, grids=(8,), sigma: float | None = None) -> list[dict]:
    """Top-1/top-5 errors on blur-corrupted copies of ``dataset``.

    ``model`` is a heat-map network or a callable mapping an image stack to
    ranked candidate lists.  Returns one row per ``(rect_side, grid, k)`` with
    keys ``grid``, ``k``, ``rect_side`` and ``error``.
    """
    predict = model if callable(model) else (lambda imgs: network_candidates(model, imgs))
    images, vps = dataset.images, dataset.vps
    side = images.shape[-1]
    rows = []
    for rect in sides:
        spec = CorruptionSpec(rect, sigma)
        corrupted = np.stack([blur_corrupt(img, vp, spec) for img, vp in zip(images, vps)])
        candidates = predict(corrupted)
        for g in grids:
            report = evaluate(candidates, vps, g, side)
            for k in (1, 5):
                rows.append({"grid": g, "k": k, "rect_side": rect, "error": report.error(k)})
    return rows
