"""Supervised CSI fingerprinting: feature vectors to 2-D positions."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mlp import (MlpModel, RmsProp, fit_standardization, flat_grads, forward, init_mlp,
                  mse_value_and_grad)

log = logging.getLogger(__name__)

FULL_SCALE_HIDDEN = (1024, 512, 256, 128, 64)


@dataclass
class TrainConfig:
    hidden: tuple[int, ...] = (256, 64)
    learning_rate: float = 1e-3
    lr_decay: float = 0.97
    batch_size: int = 64
    epochs: int = 60
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if (self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1
                or not 0 < self.lr_decay <= 1 or any(h < 1 for h in self.hidden)):
            raise ValueError(f"invalid training configuration {self}")


def train(features: np.ndarray, positions: np.ndarray, config: TrainConfig | None = None) -> MlpModel:
    """Mini-batch RMSProp on the MSE loss; the output bias starts at the label mean."""
    config = config or TrainConfig()
    x = np.asarray(features, dtype=float)
    y = np.asarray(positions, dtype=float)
    if len(x) == 0 or len(x) != len(y):
        raise ValueError("need a non-empty training set with one position per feature row")
    model = init_mlp([x.shape[1], *config.hidden, y.shape[1]], config.seed)
    fit_standardization(model, x)
    model.biases[-1] = y.mean(axis=0).copy()
    xs = (x - model.feature_mean) / model.feature_std

    opt = RmsProp(model.parameters(), config.learning_rate)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    plain = MlpModel(model.widths, model.weights, model.biases, model.activations)
    lr = config.learning_rate
    for epoch in range(config.epochs):
        order = rng.permutation(len(xs))
        total = 0.0
        for start in range(0, len(xs), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, (gw, gb) = mse_value_and_grad(plain, xs[idx], y[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}, batch starting {start}")
            opt.step(params, flat_grads(gw, gb), lr)
            total += loss * len(idx)
        model.loss_history.append(total / len(xs))
        lr *= config.lr_decay
        log.debug("epoch %d loss %.6g", epoch, model.loss_history[-1])
    if not model.all_finite():
        raise FloatingPointError("non-finite parameters after training")
    return model


def predict_dataset(model: MlpModel, features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    return forward(model, features)
