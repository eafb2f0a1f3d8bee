"""Grid-based top-k evaluation of vanishing point predictions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def grid_cell(vp, image_side: float, grid: int) -> tuple[int, int]:
    """Cell ``(cx, cy)`` of point ``vp = (x, y)``; points off the image clamp to the edge cells."""
    if grid < 1:
        raise ValueError("grid must be >= 1")
    out = []
    for coord in vp[:2]:
        c = math.floor(float(coord) * grid / image_side)
        out.append(min(max(c, 0), grid - 1))
    return out[0], out[1]


def predict_vp(heatmap, k: int = 1, spatial=None) -> list[tuple[float, float]]:
    """Top-``k`` pixels of ``heatmap`` by brightness as ``(x, y)`` points.

    Ties are broken by row-major index.  ``spatial`` (a
    :class:`fhtnet.nn.SpatialMap`) maps heat-map pixels to input coordinates;
    without it the pixel indices are returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    h = np.asarray(heatmap, dtype=np.float64)
    if h.ndim == 3:
        h = h.mean(axis=0)
    order = np.argsort(-h.ravel(), kind="stable")[:k]
    rows, cols = np.unravel_index(order, h.shape)
    if spatial is None:
        return [(float(c), float(r)) for r, c in zip(rows, cols)]
    xs, ys = spatial.to_input(rows, cols)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def topk_cells(candidates, image_side, grid: int, k: int) -> list[tuple[int, int]]:
    """First ``k`` distinct cells along an ordered candidate list."""
    cells: list = []
    for p in candidates:
        c = grid_cell(p, image_side, grid)
        if c not in cells:
            cells.append(c)
            if len(cells) == k:
                break
    return cells


@dataclass
class EvalReport:
    grid: int
    top1_error: float
    top5_error: float
    per_sample: list = field(default_factory=list)

    def error(self, k: int) -> float:
        return {1: self.top1_error, 5: self.top5_error}[k]


def evaluate(predictions, truths, grid: int, image_side: float) -> EvalReport:
    """Top-1 and top-5 cell errors.

    ``predictions[i]`` is an ordered list of candidate points (best first);
    a sample counts as correct for top-k when one of the first ``k``
    distinct candidate cells is the true cell.
    """
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not len(truths):
        raise ValueError("nothing to evaluate")
    miss1 = miss5 = 0
    records = []
    for cand, truth in zip(predictions, truths):
        cells = topk_cells(cand, image_side, grid, 5)
        true_cell = grid_cell(truth, image_side, grid)
        hit1 = bool(cells) and cells[0] == true_cell
        hit5 = true_cell in cells
        miss1 += not hit1
        miss5 += not hit5
        records.append({"cells": cells, "true_cell": true_cell, "top1": hit1, "top5": hit5})
    n = len(truths)
    return EvalReport(grid, miss1 / n, miss5 / n, records)


def topk_error(predictions, truths, grid: int, image_side: float, k: int) -> float:
    if k not in (1, 5):
        raise ValueError("k must be 1 or 5")
    return evaluate(predictions, truths, grid, image_side).error(k)


def _rotation_symmetric(spec) -> bool:
    sm = spec.spatial_map()
    (h_in, w_in), (h_out, w_out) = spec.input_shape[1:], spec.output_shape[1:]
    return np.isclose(sm.scale_y * (h_out - 1) + 2 * sm.offset_y, h_in - 1) and np.isclose(
        sm.scale_x * (w_out - 1) + 2 * sm.offset_x, w_in - 1
    )


def network_heatmaps(network, images, batch: int = 64, rotation_average: bool = False) -> np.ndarray:
    """Forward ``images`` in batches; returns ``(N, C, h, w)`` output maps.

    With ``rotation_average`` the map of the image turned by 180 degrees is
    turned back and added.  A half turn keeps every line slope, so both
    passes see the same orientation family, but the dyadic patterns cross
    each line at different pixels and their rounding errors partly cancel.
    Requires a heat map that sits centred on the input.
    """
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[:, None]
    if rotation_average and not _rotation_symmetric(network.spec):
        raise ValueError("rotation averaging needs a heat map centred on the input")
    maps = []
    for start in range(0, len(x), batch):
        chunk = x[start : start + batch]
        m = network.forward(chunk)
        if rotation_average:
            m = m + network.forward(np.ascontiguousarray(chunk[..., ::-1, ::-1]))[..., ::-1, ::-1]
        maps.append(m)
    return np.concatenate(maps) if maps else np.zeros((0,) + network.spec.output_shape)


def network_candidates(
    network, images, limit: int | None = None, batch: int = 64, rotation_average: bool = False
) -> list[list]:
    """Ranked candidate points from a heat-map network, one list per image.

    ``images`` is ``(N, H, W)`` or ``(N, C, H, W)``.  Every heat-map pixel is
    ranked unless ``limit`` caps the list.
    """
    spatial = network.spec.spatial_map()
    out = []
    for m in network_heatmaps(network, images, batch, rotation_average):
        k = m[0].size if limit is None else min(limit, m[0].size)
        out.append(predict_vp(m, k, spatial))
    return out
