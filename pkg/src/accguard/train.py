"""Deterministic training loop for small quantized MLPs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import cross_entropy_logits
from .network import Network


class TrainingDivergence(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-2
    lr_factor: float = 0.5
    lr_period: int = 10
    weight_decay: float = 0.0
    lam: float = 1e-2
    seed: int = 0
    optimizer: str = "adam"
    momentum: float = 0.9

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


class _SGD:
    def __init__(self, params, momentum):
        self.params = params
        self.momentum = momentum
        self.vel = {name: np.zeros_like(p.data) for name, p, _ in params}

    def step(self, lr, weight_decay):
        for name, p, decay in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if decay:
                g = g + weight_decay * p.data
            v = self.vel[name]
            v *= self.momentum
            v += g
            p.data = p.data - lr * v


class _Adam:
    def __init__(self, params, b1=0.9, b2=0.999, eps=1e-8):
        self.params = params
        self.b1, self.b2, self.eps = b1, b2, eps
        self.m = {name: np.zeros_like(p.data) for name, p, _ in params}
        self.v = {name: np.zeros_like(p.data) for name, p, _ in params}
        self.t = 0

    def step(self, lr, weight_decay):
        self.t += 1
        for name, p, decay in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if decay:
                g = g + weight_decay * p.data
            m = self.m[name] = self.b1 * self.m[name] + (1 - self.b1) * g
            v = self.v[name] = self.b2 * self.v[name] + (1 - self.b2) * g * g
            mh = m / (1 - self.b1**self.t)
            vh = v / (1 - self.b2**self.t)
            p.data = p.data - lr * mh / (np.sqrt(vh) + self.eps)


def model_sparsity(net: Network) -> float:
    """Size-weighted fraction of zero-valued integer weights."""
    total = zeros = 0
    for w in net.integer_weights():
        if w is None:
            continue
        total += w.size
        zeros += int((w == 0).sum())
    return zeros / total if total else 0.0


def accuracy(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    logits = net.predict_logits(X)
    return float((logits.argmax(axis=1) == y).mean())


def fit(net: Network, X: np.ndarray, y: np.ndarray, config: TrainConfig) -> list[dict]:
    """Train in place; returns the per-epoch metrics log.

    Fully determined by the config seed: batch order comes from a
    dedicated Generator and all math is float64 numpy.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    params = list(net.params())
    opt = (
        _Adam(params)
        if config.optimizer == "adam"
        else _SGD(params, config.momentum)
    )
    Xq = net.quantize_input(X)
    n = len(X)
    history = []
    for epoch in range(config.epochs):
        lr = config.lr * (config.lr_factor ** (epoch // config.lr_period))
        order = rng.permutation(n)
        losses, pens = [], []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            logits, pen = net.forward(Xq[idx])
            task = cross_entropy_logits(logits, y[idx])
            total = task + pen * config.lam
            if not np.isfinite(total.data):
                raise TrainingDivergence(
                    f"non-finite loss at epoch {epoch} (task={task.data}, "
                    f"penalty={pen.data}); lower the learning rate"
                )
            for _, p, _ in params:
                p.grad = None
            total.backward()
            opt.step(lr, config.weight_decay)
            losses.append(float(task.data))
            pens.append(float(pen.data))
        history.append(
            {
                "epoch": epoch,
                "task_loss": float(np.mean(losses)),
                "penalty": float(np.mean(pens)),
                "metric": accuracy(net, X, y),
                "sparsity": model_sparsity(net),
            }
        )
    return history
