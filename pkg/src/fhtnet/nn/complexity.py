"""Operation counts per layer for conv and FHT layers."""
from __future__ import annotations

import math

from .layers import Activation, Conv, Fht, Pad
from .network import NetworkSpec


def conv_ops(channels: int, side: int, kernel: int, filters: int) -> int:
    """``c * s**2 * f**2 * m`` multiply-adds."""
    return channels * side * side * kernel * kernel * filters


def fht_ops(channels: int, side: int) -> int:
    """``c * s**2 * log2(s)`` additions."""
    return channels * side * side * int(math.log2(side))


def complexity_report(spec: NetworkSpec) -> list[dict]:
    """One row per conv/FHT layer with its operation count.

    Each FHT row carries ``ratio_prev`` / ``ratio_next``: conv ops of the
    nearest convolution before / after it (skipping frames and activations)
    divided by the FHT ops.
    """
    rows = []
    for tr in spec.trace():
        layer = tr.layer
        if isinstance(layer, Conv):
            c, h, w = tr.in_shape
            kh, kw = layer.kernel
            ops = c * h * w * kh * kw * layer.filters
            rows.append({"index": tr.index, "type": "conv", "ops": ops})
        elif isinstance(layer, Fht):
            c, h, _ = tr.in_shape
            ops = fht_ops(c, h) * (len(layer.quadrants) if not layer.transposed else 1)
            rows.append({"index": tr.index, "type": "fht_t" if layer.transposed else "fht", "ops": ops})
    for i, row in enumerate(rows):
        if not row["type"].startswith("fht"):
            continue
        prev = next((r for r in reversed(rows[:i]) if r["type"] == "conv"), None)
        nxt = next((r for r in rows[i + 1 :] if r["type"] == "conv"), None)
        row["ratio_prev"] = prev["ops"] / row["ops"] if prev else None
        row["ratio_next"] = nxt["ops"] / row["ops"] if nxt else None
    return rows
