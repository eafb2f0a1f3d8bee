"""scikit-learn style wrappers around the transform, the network and the classical detector."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .fht import Quadrant, fht_quadrant
from .nn import Network, TrainConfig, build_fht_arch, train
from .vp.classical import classical_candidates, pad_pow2
from .vp.evaluate import evaluate, network_candidates, network_heatmaps


def check_images(X, *, square_pow2: bool = False, allow_pad: bool = False) -> np.ndarray:
    """Validate an image stack ``(n_samples, H, W)``; a single 2-D image is promoted."""
    arr = np.asarray(X)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.number) and arr.dtype != bool:
        raise ValueError(f"expected a numeric image stack, got dtype {arr.dtype}")
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"expected images of shape (n_samples, H, W), got {arr.shape}")
    if arr.shape[0] == 0 or 0 in arr.shape[1:]:
        raise ValueError(f"empty image stack {arr.shape}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError("images contain NaN or infinity")
    if square_pow2:
        h, w = arr.shape[1:]
        if h != w or h & (h - 1):
            if not allow_pad:
                raise ValueError(f"images are {h}x{w}; need a square power-of-two side")
            arr = np.stack([pad_pow2(a) for a in arr])
    return arr


def check_points(y, n: int) -> np.ndarray:
    pts = np.asarray(y, dtype=np.float64)
    if pts.shape != (n, 2):
        raise ValueError(f"expected {n} points of shape ({n}, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or infinity")
    return pts


def _quadrants(value) -> tuple:
    items = value.split(",") if isinstance(value, str) else value
    return tuple(Quadrant.parse(q) for q in items)


class HoughTransformer(TransformerMixin, BaseEstimator):
    """Stateless FHT over an image stack; ``transform`` returns ``(n_samples, n, n)``."""

    def __init__(self, quadrant="hd", transposed: bool = False, pad_to_pow2: bool = False):
        self.quadrant = quadrant
        self.transposed = transposed
        self.pad_to_pow2 = pad_to_pow2

    def fit(self, X, y=None):
        arr = check_images(X, square_pow2=True, allow_pad=self.pad_to_pow2)
        self.quadrant_ = Quadrant.parse(self.quadrant)
        self.side_ = arr.shape[-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "side_")
        arr = check_images(X, square_pow2=True, allow_pad=self.pad_to_pow2)
        if arr.shape[-1] != self.side_:
            raise ValueError(f"fitted on side {self.side_}, got {arr.shape[-1]}")
        return fht_quadrant(arr, self.quadrant_, transposed=self.transposed)


class _VPScoreMixin:
    def score(self, X, y, grid: int = 8) -> float:
        """Top-1 grid accuracy (1 minus the top-1 cell error)."""
        arr = check_images(X)
        pts = check_points(y, len(arr))
        return 1.0 - evaluate(self.predict_candidates(arr), pts, grid, arr.shape[-1]).top1_error

    def predict(self, X) -> np.ndarray:
        """Best vanishing point per image as ``(n_samples, 2)`` ``(x, y)``."""
        return np.array([c[0] for c in self.predict_candidates(X, limit=1)])


class FHTVanishingPointDetector(_VPScoreMixin, BaseEstimator):
    """Heat-map network with FHT / transposed-FHT layers trained on ``(image, vp)`` pairs.

    ``use_fht=False`` trains the parameter-matched twin without FHT layers.
    Defaults are the settings tuned for 64x64 synthetic data with lines in
    the horizontal family (both horizontal quadrants as Hough channels).
    ``rotation_average`` adds the heat map of the half-turned image at
    prediction time.
    """

    def __init__(
        self,
        scale="toy",
        filters=None,
        quadrants="hd,hu",
        use_fht: bool = True,
        epochs: int = 8,
        learning_rate: float = 0.0015,
        momentum: float = 0.9,
        batch_size: int = 8,
        loss="heatmap_ce",
        sigma: float = 1.0,
        gain: float = 5.0,
        optimizer="adam",
        lr_decay: float = 0.85,
        rotation_average: bool = True,
        dtype="float32",
        random_state: int = 0,
    ):
        self.scale = scale
        self.filters = filters
        self.quadrants = quadrants
        self.use_fht = use_fht
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.loss = loss
        self.sigma = sigma
        self.gain = gain
        self.optimizer = optimizer
        self.lr_decay = lr_decay
        self.rotation_average = rotation_average
        self.dtype = dtype
        self.random_state = random_state

    def _spec(self, side: int):
        return build_fht_arch(self.scale, input_side=side, filters=self.filters,
                              quadrants=_quadrants(self.quadrants), use_fht=self.use_fht)

    def fit(self, X, y, callback=None):
        arr = check_images(X)
        pts = check_points(y, len(arr))
        if arr.shape[1] != arr.shape[2]:
            raise ValueError("images must be square")
        spec = self._spec(arr.shape[-1])
        cfg = TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size, epochs=self.epochs,
            seed=self.random_state, loss=self.loss, momentum=self.momentum, sigma=self.sigma,
            gain=self.gain, dtype=self.dtype, optimizer=self.optimizer, lr_decay=self.lr_decay,
        )
        res = train(spec, arr, pts, cfg, callback=callback)
        self.network_ = res.network
        self.loss_history_ = list(res.loss_history)
        self.image_side_ = arr.shape[-1]
        return self

    def predict_candidates(self, X, limit: int | None = None) -> list[list]:
        """Ranked ``(x, y)`` candidates per image (all heat-map pixels by default)."""
        check_is_fitted(self, "network_")
        arr = check_images(X)
        if arr.shape[1:] != (self.image_side_, self.image_side_):
            raise ValueError(f"fitted on {self.image_side_}x{self.image_side_} images, got {arr.shape[1:]}")
        return network_candidates(self.network_, arr.astype(self.network_.dtype), limit,
                                  rotation_average=self.rotation_average)

    def heatmaps(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        arr = check_images(X)
        return network_heatmaps(self.network_, arr.astype(self.network_.dtype),
                                rotation_average=self.rotation_average)[:, 0]

    @classmethod
    def from_network(cls, network: Network, **params) -> "FHTVanishingPointDetector":
        """Wrap an already trained network."""
        est = cls(**params)
        est.network_ = network
        est.loss_history_ = []
        est.image_side_ = network.spec.input_shape[-1]
        return est


class ClassicalVPDetector(_VPScoreMixin, BaseEstimator):
    """Brightest pixel of the FHT / transposed-FHT composition; nothing is learned."""

    def __init__(self, quadrants="hd", prefilter: bool = False):
        self.quadrants = quadrants
        self.prefilter = prefilter

    def fit(self, X=None, y=None):
        if X is not None:
            check_images(X)
        self.quadrants_ = _quadrants(self.quadrants)
        return self

    def predict_candidates(self, X, limit: int | None = 4096) -> list[list]:
        check_is_fitted(self, "quadrants_")
        arr = check_images(X)
        return [classical_candidates(a, self.quadrants_, self.prefilter, limit) for a in arr]
