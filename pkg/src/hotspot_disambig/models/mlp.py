from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .common import (
    AdamW, Standardizer, bce_with_logits, check_finite, class_weights, pack_array, sigmoid, unpack_array,
)

HIDDEN = (128, 64)


@dataclass(frozen=True)
class MLPConfig:
    hidden: tuple = HIDDEN
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    pos_weight: float = 1.0
    zero_output_init: bool = True


@dataclass
class MLPModel:
    params: dict  # W0, b0, W1, b1, ... in layer order
    config: MLPConfig = field(default_factory=MLPConfig)
    standardizer: Optional[Standardizer] = None
    model_type = "mlp"

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    @property
    def n_features(self) -> int:
        return self.params["W0"].shape[0]

    def forward(self, X):
        """Return output logits and the per-layer cache used by backprop."""
        a = X
        cache = [a]
        for i in range(self.n_layers):
            z = a @ self.params[f"W{i}"] + self.params[f"b{i}"]
            if i < self.n_layers - 1:
                a = np.maximum(z, 0.0)
                cache.append(a)
            else:
                return z[:, 0], cache

    def loss_and_grads(self, X, y):
        z, cache = self.forward(X)
        loss, dz = bce_with_logits(z, y, class_weights(y, self.config.pos_weight))
        grads = {}
        delta = dz[:, None]
        for i in reversed(range(self.n_layers)):
            a_prev = cache[i]
            grads[f"W{i}"] = a_prev.T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[f"W{i}"].T) * (a_prev > 0)
        return loss, grads

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.n_features)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return sigmoid(self.forward(X)[0])

    def params_dict(self) -> dict:
        return {k: pack_array(v) for k, v in sorted(self.params.items())}

    @classmethod
    def from_params(cls, params, hp, standardizer):
        hp = dict(hp)
        hp["hidden"] = tuple(hp.get("hidden", HIDDEN))
        return cls({k: unpack_array(v) for k, v in params.items()}, MLPConfig(**hp), standardizer)


def init_mlp(n_in: int, cfg: MLPConfig, rng) -> MLPModel:
    sizes = (n_in,) + tuple(cfg.hidden) + (1,)
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        last = i == len(sizes) - 2
        if last and cfg.zero_output_init:
            params[f"W{i}"] = np.zeros((fan_in, fan_out))
            params[f"b{i}"] = np.zeros(fan_out)
        else:
            params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
    return MLPModel(params, cfg)


def train_mlp(X, y, hp: MLPConfig = MLPConfig(), seed: int = 0) -> MLPModel:
    """Minibatch AdamW on class-weighted BCE; batch order comes from ``seed``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_finite(X)
    rng = np.random.default_rng(seed)
    model = init_mlp(X.shape[1], hp, rng)
    opt = AdamW(lr=hp.learning_rate, weight_decay=hp.weight_decay)
    n = len(y)
    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, hp.batch_size)):
            batch = order[start:start + hp.batch_size]
            loss, grads = model.loss_and_grads(X[batch], y[batch])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite MLP loss at epoch {epoch}, batch {b}")
            opt.step(model.params, grads)
    return model


def config_from(hp) -> MLPConfig:
    if isinstance(hp, MLPConfig):
        return hp
    hp = dict(hp or {})
    if "hidden" in hp:
        hp["hidden"] = tuple(hp["hidden"])
    return dataclasses.replace(MLPConfig(), **hp)
