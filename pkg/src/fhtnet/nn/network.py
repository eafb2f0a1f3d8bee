"""Network specifications, shape tracing and the runtime network."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .layers import Conv, Dense, Fht, Layer, ShapeError

__all__ = ["NetworkSpec", "LayerTrace", "SpatialMap", "Network"]


class LayerTrace(NamedTuple):
    index: int
    layer: Layer
    in_shape: tuple
    out_shape: tuple
    n_params: int


class SpatialMap(NamedTuple):
    """Affine map from output pixel indices to input pixel coordinates.

    ``x_in = scale_x * col + offset_x`` and ``y_in = scale_y * row + offset_y``.
    """

    scale_y: float
    offset_y: float
    scale_x: float
    offset_x: float

    def to_input(self, row, col):
        return self.scale_x * np.asarray(col) + self.offset_x, self.scale_y * np.asarray(row) + self.offset_y

    def to_output(self, x, y):
        """Inverse map: fractional ``(row, col)`` of an input point."""
        return (np.asarray(y) - self.offset_y) / self.scale_y, (np.asarray(x) - self.offset_x) / self.scale_x


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))

    def trace(self) -> list[LayerTrace]:
        """Propagate shapes through every layer; raises ``ShapeError`` on mismatch."""
        shape = self.input_shape
        rows = []
        for i, layer in enumerate(self.layers):
            try:
                out = layer.out_shape(shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({type(layer).__name__}): {exc}") from None
            n = sum(int(np.prod(s)) for s in layer.param_shapes(shape))
            rows.append(LayerTrace(i, layer, shape, out, n))
            shape = out
        return rows

    def validate(self) -> "NetworkSpec":
        self.trace()
        return self

    @property
    def output_shape(self) -> tuple:
        tr = self.trace()
        return tr[-1].out_shape if tr else self.input_shape

    def param_shapes(self) -> list[tuple]:
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shapes.extend(layer.param_shapes(shape))
            shape = layer.out_shape(shape)
        return shapes

    def n_params(self) -> int:
        return sum(t.n_params for t in self.trace())

    def spatial_map(self) -> SpatialMap:
        """Map output heat-map pixels back to input pixel coordinates.

        Hough-space layers between an FHT layer and the matching transposed
        FHT layer must compose to the identity, otherwise the output is not
        in image coordinates and ``ShapeError`` is raised.
        """
        self.trace()
        stack = []
        cur = [(1.0, 0.0), (1.0, 0.0)]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Fht):
                if not layer.transposed:
                    stack.append(cur)
                    cur = [(1.0, 0.0), (1.0, 0.0)]
                    continue
                if not stack:
                    raise ShapeError(f"layer {i}: transposed FHT without a preceding FHT")
                if any(abs(s - 1.0) > 1e-12 or abs(o) > 1e-12 for s, o in cur):
                    raise ShapeError(f"layer {i}: Hough-space layers do not compose to identity ({cur})")
                cur = stack.pop()
                continue
            m = layer.coord_map()
            if m is None:
                raise ShapeError(f"layer {i} ({type(layer).__name__}) has no spatial output")
            # input = a*(s*u + o) + b
            cur = [(a * s, a * o + b) for (a, b), (s, o) in zip(cur, m)]
        if stack:
            raise ShapeError("FHT layer without a matching transposed FHT layer")
        (sy, oy), (sx, ox) = cur
        if sy == 0 or sx == 0:
            raise ShapeError("spatial map is not invertible")
        return SpatialMap(sy, oy, sx, ox)


def _init_param(rng, shape, dtype):
    if len(shape) == 1:
        return np.zeros(shape, dtype=dtype)
    if len(shape) == 4:
        f, c, kh, kw = shape
        fan_in, fan_out = c * kh * kw, f * kh * kw
    else:
        fan_out, fan_in = shape
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


class Network:
    """Parameters plus forward/backward over a :class:`NetworkSpec`.

    Not safe to share between threads: ``forward`` stores the caches that
    ``backward`` consumes.
    """

    def __init__(self, spec: NetworkSpec, params: Sequence[np.ndarray] | None = None, seed: int = 0, dtype=np.float64):
        self.spec = spec.validate()
        self.dtype = np.dtype(dtype)
        shapes = spec.param_shapes()
        if params is None:
            rng = np.random.default_rng(seed)
            params = [_init_param(rng, s, self.dtype) for s in shapes]
        params = [np.asarray(p, dtype=self.dtype) for p in params]
        if [p.shape for p in params] != [tuple(s) for s in shapes]:
            raise ShapeError(f"parameter shapes {[p.shape for p in params]} do not match spec {shapes}")
        self.params = params
        self._slices = []
        k = 0
        for layer, tr in zip(spec.layers, spec.trace()):
            m = len(layer.param_shapes(tr.in_shape))
            self._slices.append(slice(k, k + m))
            k += m
        self._caches = None

    def layer_params(self, i: int) -> list:
        return self.params[self._slices[i]]

    def forward(self, x, keep_cache: bool = False, return_all: bool = False):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.spec.input_shape:
            raise ShapeError(f"input shape {x.shape[1:]} != {self.spec.input_shape}")
        caches = []
        outs = [x]
        for i, layer in enumerate(self.spec.layers):
            x, cache = layer.forward(x, self.layer_params(i))
            caches.append(cache)
            if return_all:
                outs.append(x)
        self._caches = caches if keep_cache else None
        return outs if return_all else x

    def backward(self, grad, input_grad: bool = True):
        """Gradients of all parameters given d(loss)/d(output); returns ``(grads, grad_input)``.

        With ``input_grad=False`` the gradient wrt the network input is not
        computed when the first layer allows skipping it (``None`` is returned).
        """
        if self._caches is None:
            raise RuntimeError("backward needs forward(..., keep_cache=True) first")
        grads: list = [None] * len(self.params)
        grad = np.asarray(grad, dtype=self.dtype)
        for i in reversed(range(len(self.spec.layers))):
            layer = self.spec.layers[i]
            if i == 0 and not input_grad and hasattr(layer, "param_grads"):
                grads[self._slices[i]] = layer.param_grads(grad, self._caches[i], self.layer_params(i))
                return grads, None
            grad, g = layer.backward(grad, self._caches[i], self.layer_params(i))
            grads[self._slices[i]] = g
        return grads, grad

    def copy(self) -> "Network":
        return Network(self.spec, [p.copy() for p in self.params], dtype=self.dtype)

    def astype(self, dtype) -> "Network":
        return Network(self.spec, [p.astype(dtype) for p in self.params], dtype=dtype)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params]) if self.params else np.zeros(0)
