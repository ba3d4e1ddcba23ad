from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .common import Standardizer, bce_with_logits, check_finite, class_weights, pack_array, sigmoid, unpack_array


@dataclass(frozen=True)
class LRConfig:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-4
    pos_weight: float = 1.0


@dataclass
class LRModel:
    weights: np.ndarray
    bias: float
    config: LRConfig = field(default_factory=LRConfig)
    standardizer: Optional[Standardizer] = None
    model_type = "lr"

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.n_features)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return X @ self.weights + self.bias

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def params_dict(self) -> dict:
        return {"weights": pack_array(self.weights), "bias": self.bias}

    @classmethod
    def from_params(cls, params, hp, standardizer):
        return cls(unpack_array(params["weights"]), float(params["bias"]), LRConfig(**hp), standardizer)


def logreg_loss_and_grad(w, b, X, y, cfg: LRConfig):
    """Class-weighted mean BCE plus 0.5 * l2 * |w|^2, and its gradient."""
    z = X @ w + b
    loss, dz = bce_with_logits(z, y, class_weights(y, cfg.pos_weight))
    loss += 0.5 * cfg.l2 * float(w @ w)
    return loss, X.T @ dz + cfg.l2 * w, float(dz.sum())


def train_logreg(X, y, hp: LRConfig = LRConfig(), seed: int = 0) -> LRModel:
    """Full-batch gradient descent from zero weights (``seed`` is recorded, not needed)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    check_finite(X)
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(hp.epochs):
        loss, gw, gb = logreg_loss_and_grad(w, b, X, y, hp)
        if not np.isfinite(loss):
            raise FloatingPointError("logistic regression loss became non-finite")
        w -= hp.learning_rate * gw
        b -= hp.learning_rate * gb
    return LRModel(w, b, hp)


def config_from(hp) -> LRConfig:
    if isinstance(hp, LRConfig):
        return hp
    return dataclasses.replace(LRConfig(), **(hp or {}))
