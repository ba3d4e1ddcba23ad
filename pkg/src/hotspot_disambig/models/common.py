from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(z):
    z = np.asarray(z)
    out = np.empty_like(z, dtype=np.result_type(z.dtype, np.float32))
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z, y, weights=None):
    """Weighted mean binary cross-entropy on logits, and d(loss)/dz."""
    z = np.asarray(z)
    y = np.asarray(y, dtype=z.dtype)
    w = np.ones_like(z) if weights is None else np.asarray(weights, dtype=z.dtype)
    total = w.sum()
    loss = float(np.sum(w * (np.logaddexp(0.0, z) - y * z)) / total)
    dz = w * (sigmoid(z) - y) / total
    return loss, dz


def class_weights(y, pos_weight: float, dtype=np.float64):
    y = np.asarray(y)
    return np.where(y == 1, pos_weight, 1.0).astype(dtype)


def check_finite(X, what="X"):
    X = np.asarray(X)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{what} contains non-finite values")


class Standardizer:
    """Per-feature z-scoring fitted on a training split; constant columns get scale 1."""

    def __init__(self, mean=None, scale=None):
        self.mean = None if mean is None else np.asarray(mean, dtype=np.float64)
        self.scale = None if scale is None else np.asarray(scale, dtype=np.float64)

    def fit(self, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X):
        if self.mean is None:
            raise RuntimeError("Standardizer used before fit")
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def fit_transform(self, X):
        return self.fit(X).transform(X)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(d["mean"], d["scale"])


@dataclass
class AdamW:
    """Adam with decoupled weight decay, updating a dict of arrays in place."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        self.step_count = 0
        self._m = {}
        self._v = {}

    def step(self, params: dict, grads: dict) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name in sorted(params):
            p, g = params[name], grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p *= 1.0 - self.lr * self.weight_decay
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def pack_array(a) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "dtype": str(a.dtype), "data": a.astype(np.float64).ravel().tolist()}


def unpack_array(d) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.float64).astype(d.get("dtype", "float64")).reshape(d["shape"])
