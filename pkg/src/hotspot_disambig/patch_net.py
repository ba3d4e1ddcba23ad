"""Small residual CNN over 32x32x33 patches, alone or fused with tabular features.

Trunk: 3x3 stem conv (33->16) + ReLU, residual block, 2x2 average pool,
residual block, global average pool -> 16-d embedding. A residual block is
``relu(x + conv(relu(conv(x))))``. No batch normalisation. Arrays are NHWC and
all gradients are derived by hand.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data.records import LULC_CHANNEL, PATCH_CHANNELS, PATCH_SIZE, S3_CHANNELS
from .models.common import AdamW, Standardizer, bce_with_logits, class_weights, pack_array, sigmoid, unpack_array

EMBED_DIM = 16
TABULAR_DIM = 21  # sensor 14 + time 4 + nph 3
FUSION_HIDDEN = 32
TRUNK_CONVS = ("stem", "b1c1", "b1c2", "b2c1", "b2c2")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 1e-3
    weight_decay: float = 0.01
    pos_weight: float = 1.0
    seed: int = 0
    freeze_trunk: bool = False
    dtype: str = "float32"
    zero_head_init: bool = True

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0; batch_size and learning_rate positive")


def conv3x3(x, w, b):
    """Same-padded 3x3 convolution. x: (N,H,W,C), w: (3,3,C,O)."""
    n, hh, ww, _ = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.broadcast_to(b, (n, hh, ww, w.shape[3])).copy()
    for i in range(3):
        for j in range(3):
            out += xp[:, i:i + hh, j:j + ww, :] @ w[i, j]
    return out, xp


def conv3x3_backward(dout, xp, w, need_dx: bool = True):
    n, hh, ww, o = dout.shape
    c = xp.shape[3]
    d2 = dout.reshape(-1, o)
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp) if need_dx else None
    for i in range(3):
        for j in range(3):
            win = xp[:, i:i + hh, j:j + ww, :]
            dw[i, j] = win.reshape(-1, c).T @ d2
            if need_dx:
                dxp[:, i:i + hh, j:j + ww, :] += dout @ w[i, j].T
    db = d2.sum(axis=0)
    dx = dxp[:, 1:-1, 1:-1, :] if need_dx else None
    return dx, dw, db


def avg_pool2(x):
    n, h, w, c = x.shape
    return x.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))


def avg_pool2_backward(dout):
    return np.repeat(np.repeat(dout, 2, axis=1), 2, axis=2) * 0.25


def global_avg_pool(x):
    return x.mean(axis=(1, 2))


def residual_block(x, params, prefix):
    c1, xp1 = conv3x3(x, params[f"{prefix}c1_w"], params[f"{prefix}c1_b"])
    r = np.maximum(c1, 0)
    c2, xp2 = conv3x3(r, params[f"{prefix}c2_w"], params[f"{prefix}c2_b"])
    pre = x + c2
    return np.maximum(pre, 0), (c1, xp1, xp2, pre)


def residual_block_backward(dout, cache, params, prefix, grads):
    c1, xp1, xp2, pre = cache
    dpre = dout * (pre > 0)
    dr, grads[f"{prefix}c2_w"], grads[f"{prefix}c2_b"] = conv3x3_backward(dpre, xp2, params[f"{prefix}c2_w"])
    dc1 = dr * (c1 > 0)
    dx, grads[f"{prefix}c1_w"], grads[f"{prefix}c1_b"] = conv3x3_backward(dc1, xp1, params[f"{prefix}c1_w"])
    return dx + dpre


def trunk_forward(params, x):
    """Embedding (N, 16) and the cache for :func:`trunk_backward`."""
    s, xp0 = conv3x3(x, params["stem_w"], params["stem_b"])
    a0 = np.maximum(s, 0)
    a1, cache1 = residual_block(a0, params, "b1")
    p = avg_pool2(a1)
    a2, cache2 = residual_block(p, params, "b2")
    return global_avg_pool(a2), (s, xp0, cache1, cache2, a2.shape)


def trunk_backward(demb, cache, params, grads):
    s, xp0, cache1, cache2, shape = cache
    n, h, w, c = shape
    da2 = np.broadcast_to(demb[:, None, None, :] / (h * w), shape)
    dp = residual_block_backward(da2, cache2, params, "b2", grads)
    da1 = avg_pool2_backward(dp)
    da0 = residual_block_backward(da1, cache1, params, "b1", grads)
    ds = da0 * (s > 0)
    _, grads["stem_w"], grads["stem_b"] = conv3x3_backward(ds, xp0, params["stem_w"], need_dx=False)


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_trunk(rng, dtype) -> dict:
    params = {}
    for name in TRUNK_CONVS:
        c_in = PATCH_CHANNELS if name == "stem" else EMBED_DIM
        params[f"{name}_w"] = _uniform(rng, 9 * c_in, (3, 3, c_in, EMBED_DIM), dtype)
        params[f"{name}_b"] = _uniform(rng, 9 * c_in, (EMBED_DIM,), dtype)
    return params


class PatchNormalizer:
    """Per-channel z-scoring of Sentinel-3 channels; land cover mapped to (code - 5) / 4."""

    def __init__(self, mean=None, scale=None):
        self.mean = None if mean is None else np.asarray(mean, dtype=np.float64)
        self.scale = None if scale is None else np.asarray(scale, dtype=np.float64)

    def fit(self, x) -> "PatchNormalizer":
        s3 = np.asarray(x[..., :S3_CHANNELS], dtype=np.float64).reshape(-1, S3_CHANNELS)
        self.mean = s3.mean(axis=0)
        std = s3.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)
        return self

    def transform(self, x, dtype):
        x = np.asarray(x)
        out = np.empty(x.shape, dtype=dtype)
        out[..., :S3_CHANNELS] = (x[..., :S3_CHANNELS] - self.mean) / self.scale
        out[..., LULC_CHANNEL] = (x[..., LULC_CHANNEL] - 5.0) / 4.0
        return out


def _check_patch_shape(x):
    if x.ndim != 4 or x.shape[1:] != (PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS):
        raise ValueError(f"patch batch shape {x.shape} != (N, {PATCH_SIZE}, {PATCH_SIZE}, {PATCH_CHANNELS})")


class _PatchModelBase:
    config: TrainConfig
    params: dict
    normalizer: Optional[PatchNormalizer]
    standardizer = None

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def prepare(self, patches):
        x = np.asarray(patches)
        _check_patch_shape(x)
        if self.normalizer is None:
            return x.astype(self.dtype)
        return self.normalizer.transform(x, self.dtype)

    def params_dict(self) -> dict:
        out = {k: pack_array(v) for k, v in sorted(self.params.items())}
        if self.normalizer is not None:
            out["norm_mean"] = pack_array(self.normalizer.mean)
            out["norm_scale"] = pack_array(self.normalizer.scale)
        return out

    @classmethod
    def _split_params(cls, params):
        params = dict(params)
        norm = None
        if "norm_mean" in params:
            norm = PatchNormalizer(unpack_array(params.pop("norm_mean")), unpack_array(params.pop("norm_scale")))
        return {k: unpack_array(v) for k, v in params.items()}, norm


@dataclass
class PatchCNN(_PatchModelBase):
    params: dict
    config: TrainConfig = field(default_factory=TrainConfig)
    normalizer: Optional[PatchNormalizer] = None
    model_type = "patch_cnn"

    @classmethod
    def init(cls, cfg: TrainConfig = TrainConfig(), rng=None) -> "PatchCNN":
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        dtype = np.dtype(cfg.dtype)
        params = init_trunk(rng, dtype)
        if cfg.zero_head_init:
            params["head_w"] = np.zeros((EMBED_DIM, 1), dtype=dtype)
            params["head_b"] = np.zeros(1, dtype=dtype)
        else:
            params["head_w"] = _uniform(rng, EMBED_DIM, (EMBED_DIM, 1), dtype)
            params["head_b"] = _uniform(rng, EMBED_DIM, (1,), dtype)
        return cls(params, cfg)

    def logits(self, x, tabular=None):
        emb, cache = trunk_forward(self.params, x)
        return (emb @ self.params["head_w"] + self.params["head_b"])[:, 0], emb, cache

    def forward(self, patches, tabular=None):
        """(probability, embedding) for a batch of raw patches."""
        z, emb, _ = self.logits(self.prepare(patches))
        return sigmoid(z), emb

    def loss_and_grads(self, x, y, tabular=None, freeze_trunk=False):
        z, emb, cache = self.logits(x)
        loss, dz = bce_with_logits(z, y, class_weights(y, self.config.pos_weight, x.dtype))
        dz = dz.astype(x.dtype)
        grads = {"head_w": emb.T @ dz[:, None], "head_b": np.array([dz.sum()], dtype=x.dtype)}
        if not freeze_trunk:
            trunk_backward(dz[:, None] @ self.params["head_w"].T, cache, self.params, grads)
        return loss, grads

    def predict_proba(self, patches, tabular=None, batch_size: int = 256):
        out = [self.forward(patches[i:i + batch_size])[0] for i in range(0, len(patches), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)

    @classmethod
    def from_params(cls, params, hp, standardizer=None):
        p, norm = cls._split_params(params)
        return cls(p, TrainConfig(**hp), norm)


@dataclass
class FusionNet(_PatchModelBase):
    params: dict
    config: TrainConfig = field(default_factory=TrainConfig)
    normalizer: Optional[PatchNormalizer] = None
    standardizer: Optional[Standardizer] = None
    tabular_dim: int = TABULAR_DIM
    model_type = "fusion_net"

    @classmethod
    def init(cls, cfg: TrainConfig = TrainConfig(), tabular_dim: int = TABULAR_DIM, rng=None) -> "FusionNet":
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        dtype = np.dtype(cfg.dtype)
        params = init_trunk(rng, dtype)
        fan_in = EMBED_DIM + tabular_dim
        params["fuse1_w"] = _uniform(rng, fan_in, (fan_in, FUSION_HIDDEN), dtype)
        params["fuse1_b"] = _uniform(rng, fan_in, (FUSION_HIDDEN,), dtype)
        if cfg.zero_head_init:
            params["fuse2_w"] = np.zeros((FUSION_HIDDEN, 1), dtype=dtype)
            params["fuse2_b"] = np.zeros(1, dtype=dtype)
        else:
            params["fuse2_w"] = _uniform(rng, FUSION_HIDDEN, (FUSION_HIDDEN, 1), dtype)
            params["fuse2_b"] = _uniform(rng, FUSION_HIDDEN, (1,), dtype)
        return cls(params, cfg, tabular_dim=tabular_dim)

    def prepare_tabular(self, tabular):
        t = np.asarray(tabular, dtype=np.float64).reshape(-1, self.tabular_dim)
        if self.standardizer is not None:
            t = self.standardizer.transform(t)
        return t.astype(self.dtype)

    def logits(self, x, tabular):
        emb, cache = trunk_forward(self.params, x)
        u = np.concatenate([emb, tabular], axis=1)
        hid_pre = u @ self.params["fuse1_w"] + self.params["fuse1_b"]
        hid = np.maximum(hid_pre, 0)
        z = (hid @ self.params["fuse2_w"] + self.params["fuse2_b"])[:, 0]
        return z, emb, (cache, u, hid_pre, hid)

    def forward(self, patches, tabular):
        z, emb, _ = self.logits(self.prepare(patches), self.prepare_tabular(tabular))
        return sigmoid(z), emb

    def loss_and_grads(self, x, y, tabular, freeze_trunk=False):
        z, emb, (cache, u, hid_pre, hid) = self.logits(x, tabular)
        loss, dz = bce_with_logits(z, y, class_weights(y, self.config.pos_weight, x.dtype))
        dz = dz.astype(x.dtype)[:, None]
        grads = {"fuse2_w": hid.T @ dz, "fuse2_b": dz.sum(axis=0)}
        dhid = (dz @ self.params["fuse2_w"].T) * (hid_pre > 0)
        grads["fuse1_w"] = u.T @ dhid
        grads["fuse1_b"] = dhid.sum(axis=0)
        if not freeze_trunk:
            du = dhid @ self.params["fuse1_w"].T
            trunk_backward(du[:, :EMBED_DIM], cache, self.params, grads)
        return loss, grads

    def predict_proba(self, patches, tabular, batch_size: int = 256):
        out = [
            self.forward(patches[i:i + batch_size], tabular[i:i + batch_size])[0]
            for i in range(0, len(patches), batch_size)
        ]
        return np.concatenate(out) if out else np.zeros(0)

    def params_dict(self) -> dict:
        out = super().params_dict()
        out["tabular_dim"] = self.tabular_dim
        return out

    @classmethod
    def from_params(cls, params, hp, standardizer=None):
        params = dict(params)
        tab_dim = int(params.pop("tabular_dim"))
        p, norm = cls._split_params(params)
        return cls(p, TrainConfig(**hp), norm, standardizer, tab_dim)


def stack_patches(patches):
    """(ids, array) from a sequence of RasterPatch or an (N, 32, 32, 33) array."""
    if isinstance(patches, np.ndarray):
        return np.arange(len(patches)), patches
    patches = list(patches)
    ids = np.array([p.hotspot_id for p in patches], dtype=np.int64)
    arr = np.stack([p.values for p in patches]) if patches else np.zeros((0, PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS), np.float32)
    return ids, arr


def train_patch_net(patches, y, cfg: TrainConfig = TrainConfig(), tabular=None):
    """Train a PatchCNN (``tabular`` is None) or a FusionNet.

    Samples are put in canonical hotspot-id order before the seeded shuffle, so
    the result does not depend on the order the caller supplied them in.
    """
    ids, raw = stack_patches(patches)
    _check_patch_shape(raw)
    y = np.asarray(y, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be binary")
    order = np.argsort(ids, kind="stable")
    raw, y = raw[order], y[order]
    rng = np.random.default_rng(cfg.seed)
    dtype = np.dtype(cfg.dtype)
    if tabular is None:
        model = PatchCNN.init(cfg, rng)
    else:
        tabular = np.asarray(tabular, dtype=np.float64)[order]
        model = FusionNet.init(cfg, tabular.shape[1], rng)
        model.standardizer = Standardizer().fit(tabular)
    model.normalizer = PatchNormalizer().fit(raw)
    x = model.normalizer.transform(raw, dtype)
    tab = model.prepare_tabular(tabular) if tabular is not None else None
    y = y.astype(dtype)

    opt = AdamW(lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    trainable = model.params
    if cfg.freeze_trunk:
        trunk_keys = {f"{n}_{s}" for n in TRUNK_CONVS for s in "wb"}
        trainable = {k: v for k, v in model.params.items() if k not in trunk_keys}
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(y))
        for b, start in enumerate(range(0, len(y), cfg.batch_size)):
            batch = perm[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(
                x[batch], y[batch], None if tab is None else tab[batch], freeze_trunk=cfg.freeze_trunk,
            )
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(trainable, {k: grads[k] for k in trainable})
    return model


def config_from(hp) -> TrainConfig:
    if isinstance(hp, TrainConfig):
        return hp
    return dataclasses.replace(TrainConfig(), **(hp or {}))
