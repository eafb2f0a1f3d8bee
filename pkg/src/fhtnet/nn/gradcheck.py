"""Finite-difference verification of network gradients."""
from __future__ import annotations

import numpy as np

from .network import Network


def _loss_and_grad(out, target, loss):
    from .train import heatmap_loss, softmax_ce_loss

    if loss == "heatmap":
        return heatmap_loss(out, target)
    if loss == "softmax_ce":
        return softmax_ce_loss(out, target)
    # random linear functional: loss = <out, target>
    return float(np.sum(out * target)), target


def gradient_check(
    network: Network,
    x,
    target=None,
    loss: str = "linear",
    n_checks: int = 100,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``n_checks`` parameters are drawn uniformly from the flattened parameter
    vector.  With ``loss="linear"`` the scalar is ``<output, target>`` for a
    random ``target`` unless one is given.  Relative error is
    ``|a - n| / max(|a|, |n|, tiny)`` where ``tiny`` guards exact zeros.
    """
    if network.dtype != np.float64:
        raise ValueError("gradient checks need a float64 network")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=np.float64)
    out = network.forward(x, keep_cache=True)
    if target is None:
        target = rng.standard_normal(out.shape)
    _, g_out = _loss_and_grad(out, target, loss)
    grads, _ = network.backward(g_out)
    sizes = [p.size for p in network.params]
    offsets = np.cumsum([0] + sizes)
    picks = rng.choice(offsets[-1], size=min(n_checks, offsets[-1]), replace=False)
    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[k], network.params[k].shape)
        p = network.params[k]
        orig = p[idx]
        p[idx] = orig + step
        plus, _ = _loss_and_grad(network.forward(x), target, loss)
        p[idx] = orig - step
        minus, _ = _loss_and_grad(network.forward(x), target, loss)
        p[idx] = orig
        numeric = (plus - minus) / (2 * step)
        analytic = float(grads[k][idx])
        denom = max(abs(analytic), abs(numeric), 1e-10)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst
