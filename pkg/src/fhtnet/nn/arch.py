"""Builders for the softmax baseline and the FHT heat-map architectures."""
from __future__ import annotations

from ..fht import Quadrant
from .layers import Activation, Conv, Dense, Fht, Pad, Softmax, Stack
from .network import NetworkSpec

PAPER_PARAM_COUNT = 25309
"""Trainable parameters reported for the published FHT network (not reproduced exactly)."""


class ConfigurationError(ValueError):
    pass


def build_base_arch(grid: int, input_shape=(3, 227, 227)) -> NetworkSpec:
    """Four relu convolutions, a dense layer with ``grid**2`` outputs, softmax."""
    if grid < 1:
        raise ConfigurationError("grid must be positive")
    relu = Activation("relu")
    layers = [
        Conv(32, 11, stride=4), relu,
        Conv(32, 5, padding=2), relu,
        Conv(32, 3, padding=1), relu,
        Conv(32, 3, padding=1), relu,
        Dense(grid * grid),
        Softmax(),
    ]
    return NetworkSpec(input_shape, layers).validate()


def _pow2_pad(side: int, what: str) -> int:
    target = 1
    while target < side:
        target *= 2
    if (target - side) % 2:
        raise ConfigurationError(f"{what}: side {side} cannot be framed symmetrically to {target}")
    return (target - side) // 2


def build_fht_arch(
    scale: str = "toy",
    input_side: int | None = None,
    channels: int = 1,
    filters: int | None = None,
    quadrants=(Quadrant.HORIZONTAL_DOWN,),
    use_fht: bool = True,
    normalize: bool = True,
) -> NetworkSpec:
    """Conv block, frame, FHT, conv block, frame, transposed FHT, conv block.

    ``scale="paper"`` keeps the published layer list verbatim (12 filters
    everywhere, first-block stride 3, frames 4 and 6); the default input side
    380 makes both FHT inputs 128 pixels square.  ``scale="toy"`` uses stride
    1 everywhere (a full-resolution heat map), 6 filters per layer, a
    single-filter output layer and a first frame computed to reach the next
    power of two (64x64 input gives 64x64 Hough images).

    ``normalize`` scales both FHT layers by ``side**-0.5`` so white-noise
    activations keep their variance; raw line sums saturate the ``rf``
    activations and the network stops learning.

    ``use_fht=False`` returns the same network with the FHT layers removed;
    with several quadrants the forward FHT is replaced by channel stacking so
    the parameter count is unchanged (see :func:`build_conv_arch`).
    """
    tanh = Activation("tanh")
    rf3 = Activation("rf", 3, 1.0)
    rf2 = Activation("rf", 2, 1.0)
    if scale == "paper":
        side = 380 if input_side is None else input_side
        m = 12 if filters is None else filters
        stride, head, pad1 = 3, m, 4
    elif scale == "toy":
        side = 64 if input_side is None else input_side
        m = 6 if filters is None else filters
        stride, head, pad1 = 1, 1, None
    else:
        raise ConfigurationError(f"unknown scale {scale!r}")
    quadrants = tuple(Quadrant.parse(q) for q in ((quadrants,) if isinstance(quadrants, (str, Quadrant)) else quadrants))
    nq = len(quadrants)
    if m % nq:
        raise ConfigurationError(f"{m} filters cannot be split across {nq} quadrants")

    block1 = [
        Conv(m, 5), tanh,
        Conv(m, 5, stride=stride), tanh,
        Conv(m, 3), tanh,
        Conv(m, 3), tanh,
    ]
    head_spec = NetworkSpec((channels, side, side), block1)
    _, h, w = head_spec.output_shape
    if h != w:
        raise ConfigurationError("non-square feature map")
    if pad1 is None:
        pad1 = _pow2_pad(h, "first frame")
    if (h + 2 * pad1) & (h + 2 * pad1 - 1):
        raise ConfigurationError(f"frame {pad1} around {h} is not a power of two")
    fht_side = h + 2 * pad1
    scale = fht_side**-0.5 if normalize else 1.0
    fwd = Fht(False, quadrants, scale) if use_fht else Stack(nq)
    bwd = [Fht(True, quadrants, scale)] if use_fht else []
    layers = block1 + [
        Pad(pad1), fwd, rf3,
        Conv(m, 5), tanh,
        Conv(m, 5), tanh,
        Conv(m, 5), tanh,
        Pad(6), *bwd, rf3,
        Conv(m, 5), tanh,
        Conv(m, 5), tanh,
        Conv(head, 5), rf2,
    ]
    return NetworkSpec((channels, side, side), layers).validate()


def build_conv_arch(**kwargs) -> NetworkSpec:
    """Parameter-matched twin of :func:`build_fht_arch` without FHT layers."""
    return build_fht_arch(use_fht=False, **kwargs)

