"""Layer specifications and their forward/backward rules.

Tensors are numpy arrays with a leading batch axis: ``(N, C, H, W)`` for
images and ``(N, L)`` for flat vectors.  Shapes passed to ``out_shape``
exclude the batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from ..fht import Quadrant, fht_quadrant

__all__ = [
    "ShapeError",
    "Conv",
    "Pad",
    "Activation",
    "Fht",
    "Dense",
    "Softmax",
    "Stack",
    "rf_activation",
    "rf_derivative",
    "layer_forward",
    "layer_backward",
]


class ShapeError(ValueError):
    """Layer received a tensor of incompatible shape."""


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (int, np.integer)):
        return int(v), int(v)
    a, b = v
    return int(a), int(b)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _im2col(x, kernel, stride):
    """Patches of ``x`` (N, C, H, W) as a ``(C*kh*kw, N*Ho*Wo)`` matrix."""
    n, c, h, w = x.shape
    (kh, kw), (sh, sw) = kernel, stride
    ho, wo = (h - kh) // sh + 1, (w - kw) // sw + 1
    xc = x.transpose(1, 0, 2, 3)
    cols = np.empty((c, kh, kw, n, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xc[:, :, i : i + sh * (ho - 1) + 1 : sh, j : j + sw * (wo - 1) + 1 : sw]
    return cols.reshape(c * kh * kw, n * ho * wo), ho, wo


def rf_activation(x, a: int = 3, b: float = 1.0):
    """Saturating odd activation ``s / (b + |s|)`` with ``s = sign(x) |x|**a``."""
    x = np.asarray(x)
    s = np.sign(x) * np.abs(x) ** a
    return s / (b + np.abs(s))


def rf_derivative(x, a: int = 3, b: float = 1.0):
    x = np.asarray(x)
    m = np.abs(x) ** a
    return a * np.abs(x) ** (a - 1) * b / (b + m) ** 2


class Layer:
    """Base class; concrete layers are frozen dataclasses."""

    trainable: ClassVar[bool] = False

    def out_shape(self, shape: tuple) -> tuple:
        raise NotImplementedError

    def param_shapes(self, shape: tuple) -> list[tuple]:
        return []

    def forward(self, x: np.ndarray, params: list) -> tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, cache, params: list) -> tuple[np.ndarray, list]:
        raise NotImplementedError

    def coord_map(self):
        """``(scale, offset)`` per spatial axis: input coordinate = scale * out + offset."""
        return (1.0, 0.0), (1.0, 0.0)

    def _check_image(self, shape):
        if len(shape) != 3:
            raise ShapeError(f"{type(self).__name__} expects (C, H, W), got {shape}")


@dataclass(frozen=True)
class Conv(Layer):
    """Cross-correlation with per-filter bias, optional zero padding and stride."""

    filters: int
    kernel: tuple = (3, 3)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    trainable: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "padding", _pair(self.padding))
        if self.filters < 1 or min(self.kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ValueError(f"invalid conv layer {self}")

    def out_shape(self, shape):
        self._check_image(shape)
        c, h, w = shape
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        hp, wp = h + 2 * ph, w + 2 * pw
        if hp < kh or wp < kw:
            raise ShapeError(f"kernel {self.kernel} larger than padded input {hp}x{wp}")
        return self.filters, (hp - kh) // sh + 1, (wp - kw) // sw + 1

    def param_shapes(self, shape):
        self._check_image(shape)
        return [(self.filters, shape[0], *self.kernel), (self.filters,)]

    def forward(self, x, params):
        w, b = params
        (ph, pw) = self.padding
        if ph or pw:
            x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        cols, ho, wo = _im2col(x, self.kernel, self.stride)
        out = (w.reshape(self.filters, -1) @ cols + b[:, None]).reshape(self.filters, len(x), ho, wo)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3)), (cols, x.shape)

    def param_grads(self, grad, cache, params):
        cols, _ = cache
        g2 = grad.transpose(1, 0, 2, 3).reshape(self.filters, -1)
        return [(g2 @ cols.T).reshape(params[0].shape), g2.sum(axis=1)]

    def backward(self, grad, cache, params):
        w, _ = params
        _, padded_shape = cache
        n, f, ho, wo = grad.shape
        c, hp, wp = padded_shape[1:]
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        gw, gb = self.param_grads(grad, cache, params)
        # grad wrt padded input = full correlation of the dilated gradient with the flipped kernel
        gd = np.zeros((n, f, hp + kh - 1, wp + kw - 1), dtype=grad.dtype)
        gd[:, :, kh - 1 : kh - 1 + (ho - 1) * sh + 1 : sh, kw - 1 : kw - 1 + (wo - 1) * sw + 1 : sw] = grad
        gcols, _, _ = _im2col(gd, self.kernel, (1, 1))
        wflip = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(c, -1)
        gx = (wflip @ gcols).reshape(c, n, hp, wp).transpose(1, 0, 2, 3)
        return np.ascontiguousarray(gx[:, :, ph : hp - ph, pw : wp - pw]), [gw, gb]

    def coord_map(self):
        (kh, kw), (sh, sw), (ph, pw) = self.kernel, self.stride, self.padding
        return (float(sh), (kh - 1) / 2 - ph), (float(sw), (kw - 1) / 2 - pw)


@dataclass(frozen=True)
class Pad(Layer):
    """Zero frame of ``margin`` pixels around every channel."""

    margin: tuple = (1, 1)

    def __post_init__(self):
        object.__setattr__(self, "margin", _pair(self.margin))
        if min(self.margin) < 0:
            raise ValueError("margin must be non-negative")

    def out_shape(self, shape):
        self._check_image(shape)
        c, h, w = shape
        mh, mw = self.margin
        return c, h + 2 * mh, w + 2 * mw

    def forward(self, x, params):
        mh, mw = self.margin
        return np.pad(x, ((0, 0), (0, 0), (mh, mh), (mw, mw))), None

    def backward(self, grad, cache, params):
        mh, mw = self.margin
        h, w = grad.shape[2:]
        return grad[:, :, mh : h - mh, mw : w - mw], []

    def coord_map(self):
        mh, mw = self.margin
        return (1.0, -float(mh)), (1.0, -float(mw))


@dataclass(frozen=True)
class Activation(Layer):
    """Elementwise ``tanh``, ``relu`` or ``rf`` (with exponent ``a``, offset ``b``)."""

    kind: str = "tanh"
    a: int = 3
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tanh", "relu", "rf"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "rf" and (int(self.a) != self.a or self.a < 1 or not self.b > 0):
            raise ValueError("rf needs integer a >= 1 and b > 0")

    def out_shape(self, shape):
        return tuple(shape)

    def forward(self, x, params):
        if self.kind == "tanh":
            y = np.tanh(x)
            return y, y
        if self.kind == "relu":
            return np.maximum(x, 0), x
        return rf_activation(x, self.a, self.b), x

    def backward(self, grad, cache, params):
        if self.kind == "tanh":
            return grad * (1 - cache * cache), []
        if self.kind == "relu":
            return grad * (cache > 0), []
        return grad * rf_derivative(cache, self.a, self.b), []

    def __str__(self):
        return f"rf[{self.a},{self.b:g}]" if self.kind == "rf" else self.kind


@dataclass(frozen=True)
class Fht(Layer):
    """Fast Hough Transform applied independently to every channel.

    Forward (``transposed=False``): each quadrant contributes a full copy of
    the channels, so ``C`` channels become ``C * len(quadrants)``.
    Transposed: the channels are split into ``len(quadrants)`` contiguous
    groups and each group is back-projected with its quadrant's adjoint;
    the channel count is kept.  No trainable parameters.

    ``scale`` is a fixed output factor; ``side**-0.5`` keeps the variance of
    white-noise input unchanged (each output sums ``side`` pixels).
    """

    transposed: bool = False
    quadrants: tuple = (Quadrant.HORIZONTAL_DOWN,)
    scale: float = 1.0

    def __post_init__(self):
        qs = self.quadrants
        if isinstance(qs, (str, Quadrant)):
            qs = (qs,)
        qs = tuple(Quadrant.parse(q) for q in qs)
        if not qs:
            raise ValueError("at least one quadrant required")
        object.__setattr__(self, "quadrants", qs)

    def out_shape(self, shape):
        self._check_image(shape)
        c, h, w = shape
        if h != w or not _is_pow2(h):
            raise ShapeError(f"FHT layer needs a square power-of-two input, got {h}x{w}")
        nq = len(self.quadrants)
        if self.transposed:
            if c % nq:
                raise ShapeError(f"{c} channels cannot be split into {nq} quadrant groups")
            return shape
        return c * nq, h, w

    def _apply(self, x, adjoint: bool):
        # adjoint=False applies the layer's own map, True its adjoint
        nq = len(self.quadrants)
        if self.transposed:
            groups = np.split(x, nq, axis=1)
            return np.concatenate(
                [fht_quadrant(g, q, transposed=not adjoint) for g, q in zip(groups, self.quadrants)], axis=1
            )
        if not adjoint:
            return np.concatenate([fht_quadrant(x, q) for q in self.quadrants], axis=1)
        groups = np.split(x, nq, axis=1)
        return sum(fht_quadrant(g, q, transposed=True) for g, q in zip(groups, self.quadrants))

    def forward(self, x, params):
        y = self._apply(x, adjoint=False)
        return (y if self.scale == 1 else y * y.dtype.type(self.scale)), None

    def backward(self, grad, cache, params):
        g = self._apply(grad, adjoint=True)
        return (g if self.scale == 1 else g * g.dtype.type(self.scale)), []


@dataclass(frozen=True)
class Dense(Layer):
    """Fully connected layer on the flattened input."""

    outputs: int
    trainable: ClassVar[bool] = True

    def out_shape(self, shape):
        return (self.outputs,)

    def param_shapes(self, shape):
        return [(self.outputs, int(np.prod(shape))), (self.outputs,)]

    def forward(self, x, params):
        w, b = params
        flat = x.reshape(len(x), -1)
        return flat @ w.T + b, (flat, x.shape)

    def backward(self, grad, cache, params):
        w, _ = params
        flat, shape = cache
        return (grad @ w).reshape(shape), [grad.T @ flat, grad.sum(axis=0)]

    def coord_map(self):
        return None


@dataclass(frozen=True)
class Softmax(Layer):
    def out_shape(self, shape):
        if len(shape) != 1:
            raise ShapeError(f"softmax expects a flat vector, got {shape}")
        return tuple(shape)

    def forward(self, x, params):
        z = np.exp(x - x.max(axis=1, keepdims=True))
        y = z / z.sum(axis=1, keepdims=True)
        return y, y

    def backward(self, grad, cache, params):
        y = cache
        return y * (grad - (grad * y).sum(axis=1, keepdims=True)), []

    def coord_map(self):
        return None


def layer_forward(layer: Layer, x, params=()):
    """Forward one layer; returns ``(output, cache)``."""
    return layer.forward(x, list(params))


def layer_backward(layer: Layer, grad, cache, params=()):
    """Backward one layer; returns ``(grad_input, grad_params)``."""
    if cache is None and layer.trainable:
        raise RuntimeError("backward called without a forward cache")
    return layer.backward(grad, cache, list(params))


@dataclass(frozen=True)
class Stack(Layer):
    """Concatenate ``copies`` copies of the input along channels."""

    copies: int = 1

    def out_shape(self, shape):
        self._check_image(shape)
        return shape[0] * self.copies, *shape[1:]

    def forward(self, x, params):
        return (x if self.copies == 1 else np.concatenate([x] * self.copies, axis=1)), None

    def backward(self, grad, cache, params):
        return sum(np.split(grad, self.copies, axis=1)), []
