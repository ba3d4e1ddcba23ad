"""JSON model files shared by every model family.

    {"format_version": 1, "model_type": "...", "hyperparameters": {...},
     "params": {...}, "standardizer": {...} | null, "metadata": {...}}

Dense arrays are stored as ``{"shape", "dtype", "data"}`` with a flat list.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .common import Standardizer

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _registry() -> dict:
    from ..patch_net import FusionNet, PatchCNN
    from .gbdt import GBDTModel
    from .logreg import LRModel
    from .mlp import MLPModel

    return {cls.model_type: cls for cls in (LRModel, MLPModel, GBDTModel, PatchCNN, FusionNet)}


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def model_to_dict(model, metadata: dict = None) -> dict:
    hp = {k: _jsonable(v) for k, v in dataclasses.asdict(model.config).items()}
    std = getattr(model, "standardizer", None)
    return {
        "format_version": FORMAT_VERSION,
        "model_type": model.model_type,
        "hyperparameters": hp,
        "params": model.params_dict(),
        "standardizer": None if std is None else std.to_dict(),
        "metadata": metadata or {},
    }


def model_from_dict(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {d.get('format_version')!r}")
    kind = d.get("model_type")
    registry = _registry()
    if kind not in registry:
        raise ModelFormatError(f"unknown model_type {kind!r}")
    std = d.get("standardizer")
    return registry[kind].from_params(d["params"], d["hyperparameters"], None if std is None else Standardizer.from_dict(std))


def dumps_model(model, metadata: dict = None) -> str:
    return json.dumps(model_to_dict(model, metadata), sort_keys=True, separators=(",", ":"))


def save_model(model, path, metadata: dict = None) -> None:
    Path(path).write_text(dumps_model(model, metadata), encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(d)


def predict_proba(model, X) -> np.ndarray:
    """Probabilities for tabular models; dimension must match the model."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        X = X.reshape(-1, model.n_features) if X.size else np.zeros((0, model.n_features))
    if X.shape[0] == 0:
        return np.zeros(0)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return model.predict_proba(X)
