"""Floating-point training and crossbar-in-the-loop retraining."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mapping as mp
from . import network as nw


class DivergenceError(FloatingPointError):
    """Loss or weights became non-finite."""


@dataclass
class TrainState:
    shadow: nw.Network
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    refresh_interval: int = 1
    step: int = 0
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.refresh_interval < 1:
            raise ValueError("refresh_interval must be >= 1")
        if self.lr < 0 or not 0 <= self.momentum < 1:
            raise ValueError("need lr >= 0 and 0 <= momentum < 1")
        if not self.velocity:
            self.velocity = {i: [np.zeros_like(w), np.zeros_like(b)]
                             for i, (w, b) in self.shadow.weights.items()}


def sgd_update(state: TrainState, grads: dict) -> None:
    for i, (dw, db) in grads.items():
        w, b = state.shadow.weights[i]
        vw, vb = state.velocity[i]
        if state.weight_decay:
            dw = dw + state.weight_decay * w
        with np.errstate(over="ignore", invalid="ignore"):
            vw *= state.momentum
            vw -= state.lr * dw.astype(w.dtype)
            vb *= state.momentum
            vb -= state.lr * db.astype(b.dtype)
            w += vw
            b += vb
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DivergenceError(f"non-finite shadow weights in layer {i}")


def fp_step(state: TrainState, x, y) -> float:
    """One SGD step of the plain floating-point network."""
    scores, caches = nw.forward(state.shadow, x, keep=True)
    loss, d = nw.softmax_loss(scores, y)
    if not np.isfinite(loss):
        raise DivergenceError(f"loss is {loss} at step {state.step}")
    sgd_update(state, nw.backward(state.shadow, caches, d))
    state.step += 1
    return loss


def train_step(state: TrainState, mapped: mp.MappedNetwork, x, y, ideal: bool = False):
    """One crossbar-in-the-loop step; returns ``(mapped, loss)``.

    The forward pass runs on the tiles. The backward pass reuses the layer
    inputs it produced but multiplies by the shadow weights, i.e. quantizers
    and non-idealities are passed straight through. Crossbar outputs are
    already dequantized into weight units (the a_scale * w_scale factor), so
    the gradients need no further scaling. Tiles are re-programmed every
    ``refresh_interval`` steps.
    """
    hook = mp.crossbar_matmul(mapped, ideal)
    scores, caches = nw.forward(mapped.net, x, hook, keep=True)
    loss, d = nw.softmax_loss(scores, y)
    if not np.isfinite(loss):
        raise DivergenceError(f"loss is {loss} at step {state.step}")
    sgd_update(state, nw.backward(state.shadow, caches, d))
    state.step += 1
    if state.step % state.refresh_interval == 0:
        mapped = mp.refresh(mapped, state.shadow)
    return mapped, loss


def batches(n: int, batch: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch):
        yield order[s:s + batch]


def cosine_lr(lr: float, epoch: int, epochs: int, final_fraction: float) -> float:
    cos = 0.5 * (1 + np.cos(np.pi * epoch / max(epochs - 1, 1)))
    return lr * (final_fraction + (1 - final_fraction) * cos)


def train_fp(net: nw.Network, data, epochs: int = 10, batch: int = 32, lr: float = 0.05,
             momentum: float = 0.9, weight_decay: float = 1e-4, seed: int = 0,
             final_lr_fraction: float = 0.05) -> list:
    """Train ``net`` in place with a cosine learning-rate schedule; returns
    the mean loss per epoch."""
    state = TrainState(net, lr=lr, momentum=momentum, weight_decay=weight_decay)
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(epochs):
        state.lr = cosine_lr(lr, epoch, epochs, final_lr_fraction)
        losses = [fp_step(state, data.x[idx], data.y[idx]) for idx in batches(len(data), batch, rng)]
        history.append(float(np.mean(losses)))
    return history


def retrain(mapped: mp.MappedNetwork, data, epochs: int = 5, batch: int = 32, lr: float = 0.005,
            momentum: float = 0.9, weight_decay: float = 0.0, refresh_interval: int = 1,
            seed: int = 0, final_lr_fraction: float = 0.1, callback=None):
    """Retrain through the crossbar forward pass (cosine learning-rate
    schedule); returns ``(mapped, history)``."""
    shadow = mapped.net.copy()
    mapped = mp.MappedNetwork(shadow, mapped.config, mapped.layers, mapped.variation)
    state = TrainState(shadow, lr=lr, momentum=momentum, weight_decay=weight_decay,
                       refresh_interval=refresh_interval)
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(epochs):
        state.lr = cosine_lr(lr, epoch, epochs, final_lr_fraction)
        losses = []
        for idx in batches(len(data), batch, rng):
            mapped, loss = train_step(state, mapped, data.x[idx], data.y[idx])
            losses.append(loss)
        history.append(float(np.mean(losses)))
        if callback is not None:
            callback(epoch, mapped, history[-1])
    if state.step % state.refresh_interval:
        mapped = mp.refresh(mapped, state.shadow)
    return mapped, history
