"""Small fully connected network in numpy with manual backpropagation.

Shared by fingerprinting (MSE on positions) and charting (Siamese loss).
Hidden layers use rectifiers, the output layer is linear. Inputs are
standardized with statistics stored on the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MlpModel:
    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.widths) - 1:
            raise ValueError("one weight matrix per layer transition expected")
        if self.activations[-1] != "linear" or any(a != "relu" for a in self.activations[:-1]):
            raise ValueError("hidden layers must be 'relu' and the output 'linear'")

    @property
    def input_width(self) -> int:
        return self.widths[0]

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


def init_mlp(widths, seed: int = 0) -> MlpModel:
    """Uniform fan-in initialization, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError(f"invalid widths {widths}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    acts = ["relu"] * (len(widths) - 2) + ["linear"]
    return MlpModel(widths, weights, biases, acts)


def standardize(model: MlpModel, x: np.ndarray) -> np.ndarray:
    if model.feature_mean is None:
        return x
    return (x - model.feature_mean) / model.feature_std


def fit_standardization(model: MlpModel, x: np.ndarray) -> None:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    model.feature_mean = mean
    model.feature_std = np.where(std > 1e-12 * max(np.abs(mean).max(), 1e-300), std, 1.0)


def forward_cached(model: MlpModel, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    for W, b, kind in zip(model.weights, model.biases, model.activations):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if kind == "relu" else z
        acts.append(a)
    return a, (acts, pre)


def forward(model: MlpModel, f: np.ndarray) -> np.ndarray:
    """Output for one feature vector ``(F,)`` or a batch ``(L, F)``."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != model.input_width:
        raise ValueError(f"feature length {f.shape[-1]} != input width {model.input_width}")
    out, _ = forward_cached(model, standardize(model, np.atleast_2d(f)))
    return out[0] if f.ndim == 1 else out


def backward(model: MlpModel, cache, grad_out: np.ndarray):
    """Parameter gradients for an upstream gradient on the output batch."""
    acts, pre = cache
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    g = grad_out
    for i in reversed(range(len(model.weights))):
        if model.activations[i] == "relu":
            g = g * (pre[i] > 0)
        grads_w[i] = acts[i].T @ g
        grads_b[i] = g.sum(axis=0)
        if i:
            g = g @ model.weights[i].T
    return grads_w, grads_b


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean over samples of the squared Euclidean error, and its gradient."""
    diff = pred - target
    n = len(pred)
    return float(np.sum(diff ** 2) / n), 2.0 * diff / n


def mse_value_and_grad(model: MlpModel, x: np.ndarray, y: np.ndarray):
    pred, cache = forward_cached(model, standardize(model, x))
    loss, g = mse_loss(pred, y)
    return loss, backward(model, cache, g)


class RmsProp:
    """Per-parameter step scaled by a running RMS of the gradient, no momentum."""

    def __init__(self, params, lr: float = 1e-3, rho: float = 0.9, eps: float = 1e-8):
        self.lr, self.rho, self.eps = lr, rho, eps
        self.sq = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for p, g, s in zip(params, grads, self.sq):
            s *= self.rho
            s += (1 - self.rho) * g * g
            p -= lr * g / (np.sqrt(s) + self.eps)


def flat_grads(grads_w, grads_b) -> list[np.ndarray]:
    return [g for pair in zip(grads_w, grads_b) for g in pair]
