"""Minibatch SGD training with heat-map or softmax losses."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .network import Network, NetworkSpec, SpatialMap

log = logging.getLogger(__name__)

LOSSES = ("heatmap", "heatmap_ce", "softmax_ce")
OPTIMIZERS = ("sgd", "adam")


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, message, *, epoch, step, loss, max_abs_param):
        super().__init__(f"{message} (epoch {epoch}, step {step}, loss {loss}, max |param| {max_abs_param:.3g})")
        self.epoch = epoch
        self.step = step
        self.loss = loss
        self.max_abs_param = max_abs_param


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 10
    seed: int = 0
    loss: str = "heatmap"
    momentum: float = 0.0
    sigma: float = 2.0
    gain: float = 5.0
    dtype: str = "float64"
    lr_decay: float = 1.0  # learning rate factor applied after every epoch
    optimizer: str = "sgd"  # "adam" uses momentum as beta1 and beta2 = 0.999

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.sigma <= 0 or self.lr_decay <= 0:
            raise ValueError(f"invalid training configuration {self}")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class TrainResult:
    network: Network
    loss_history: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)


def target_heatmaps(vps, spatial: SpatialMap, out_hw, sigma: float = 2.0) -> np.ndarray:
    """Gaussian bumps (peak 1, ``sigma`` in input pixels) at each vanishing point.

    Heat-map pixels are evaluated at the centre of the input pixel they map to.
    """
    h, w = out_hw
    xs, ys = spatial.to_input(np.arange(h)[:, None], np.arange(w)[None, :])
    # pixel i covers [i, i + 1)
    xs, ys = xs + 0.5, ys + 0.5
    vps = np.asarray(vps, dtype=np.float64).reshape(-1, 2)
    d2 = (xs[None] - vps[:, 0, None, None]) ** 2 + (ys[None] - vps[:, 1, None, None]) ** 2
    return np.exp(-d2 / (2 * sigma**2))[:, None]


def heatmap_loss(out, target):
    """Sum of squared errors per sample, averaged over the batch."""
    diff = out - target
    n = len(out)
    return float(np.sum(diff * diff) / n), 2 * diff / n


def heatmap_ce_loss(out, target, gain: float = 5.0):
    """Cross-entropy between a spatial softmax of ``gain * out`` and the normalised target map."""
    n = len(out)
    z = gain * out.reshape(n, -1)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    q = target.reshape(n, -1)
    q = q / q.sum(axis=1, keepdims=True)
    loss = float(-(q * logp).sum() / n)
    grad = gain * (np.exp(logp) - q) / n
    return loss, grad.reshape(out.shape).astype(out.dtype, copy=False)


def softmax_ce_loss(prob, labels):
    n = len(prob)
    idx = np.arange(n), np.asarray(labels, dtype=np.int64)
    p = np.clip(prob[idx], 1e-300, None)
    grad = np.zeros_like(prob)
    grad[idx] = -1.0 / (n * p)
    return float(-np.log(p).sum() / n), grad


def make_targets(net: NetworkSpec, vps, cfg: TrainConfig, grid: int | None = None):
    """Per-sample targets for the configured loss."""
    if cfg.loss in ("heatmap", "heatmap_ce"):
        c, h, w = net.output_shape
        return target_heatmaps(vps, net.spatial_map(), (h, w), cfg.sigma)
    if grid is None:
        raise ValueError("softmax_ce needs a grid size")
    from ..vp.evaluate import grid_cell

    side = net.input_shape[-1]
    cells = [grid_cell(v, side, grid) for v in np.asarray(vps).reshape(-1, 2)]
    return np.array([cy * grid + cx for cx, cy in cells], dtype=np.int64)


def batch_loss(network: Network, x, targets, cfg: TrainConfig):
    out = network.forward(x, keep_cache=True)
    if cfg.loss == "heatmap":
        return heatmap_loss(out, targets)
    if cfg.loss == "heatmap_ce":
        return heatmap_ce_loss(out, targets, cfg.gain)
    return softmax_ce_loss(out, targets)


def _adam_step(params, grads, first, second, lr, beta1, t, beta2=0.999, eps=1e-8):
    # bias-corrected step size folded into one scalar
    scale = lr * np.sqrt(1 - beta2**t) / (1 - beta1**t)
    for p, g, m, v in zip(params, grads, first, second):
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= (scale * m / (np.sqrt(v) + eps)).astype(p.dtype, copy=False)


def train(
    spec: NetworkSpec,
    images,
    vps,
    cfg: TrainConfig,
    network: Network | None = None,
    grid: int | None = None,
    callback=None,
) -> TrainResult:
    """Train on images ``(N, C, H, W)`` (or ``(N, H, W)``) with VP targets ``(N, 2)``.

    Deterministic for a fixed ``cfg.seed``: the same seed initialises the
    parameters and orders the minibatches.
    """
    x = np.asarray(images)
    if x.ndim == 3:
        x = x[:, None]
    dtype = np.dtype(cfg.dtype)
    x = x.astype(dtype, copy=False)
    targets = make_targets(spec, vps, cfg, grid)
    if cfg.loss != "softmax_ce":
        targets = targets.astype(dtype)
    if network is None:
        network = Network(spec, seed=cfg.seed, dtype=dtype)
    rng = np.random.default_rng(cfg.seed + 1)
    velocity = [np.zeros_like(p) for p in network.params]
    second = [np.zeros_like(p) for p in network.params] if cfg.optimizer == "adam" else None
    lr = dtype.type(cfg.learning_rate)
    mu = dtype.type(cfg.momentum)
    result = TrainResult(network)
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grad = batch_loss(network, x[idx], targets[idx], cfg)
            if not np.isfinite(loss):
                peak = max((float(np.max(np.abs(p))) for p in network.params), default=0.0)
                raise DivergenceError("non-finite training loss", epoch=epoch, step=step, loss=loss, max_abs_param=peak)
            grads, _ = network.backward(grad, input_grad=False)
            if second is None:
                for p, g, v in zip(network.params, grads, velocity):
                    v *= mu
                    v -= lr * g
                    p += v
            else:
                _adam_step(network.params, grads, velocity, second, lr, cfg.momentum, step + 1)
            total += loss * len(idx)
            result.step_losses.append(loss)
            step += 1
        lr = lr * dtype.type(cfg.lr_decay)
        result.loss_history.append(total / len(x))
        log.info("epoch %d loss %.6g", epoch, result.loss_history[-1])
        if callback is not None:
            callback(epoch, result)
    return result
