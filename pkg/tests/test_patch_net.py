import json

import numpy as np
import pytest

from hotspot_disambig.data import RasterPatch
from hotspot_disambig.metrics import compute_metrics, threshold
from hotspot_disambig.models.io import dumps_model, model_from_dict
from hotspot_disambig.patch_net import (
    EMBED_DIM, TRUNK_CONVS, FusionNet, PatchCNN, TrainConfig, global_avg_pool, residual_block, train_patch_net,
    trunk_forward,
)
from gradcheck import as_float64, max_rel, patch_grad_check
from oracles import central_diff

SHAPE = (32, 32, 33)


def rand_patches(rng, n, dtype=np.float64):
    x = rng.normal(size=(n, *SHAPE)).astype(dtype)
    x[..., 32] = rng.integers(-1, 2, size=(n, 32, 32))  # land cover already mapped to (code - 5) / 4 range
    return x


def planted(rng, n=64, channel=5):
    """Positives carry a bright 6x6 blob at the centre of one channel."""
    x = rng.normal(size=(n, *SHAPE)).astype(np.float32)
    x[..., 32] = rng.integers(1, 10, size=(n, 32, 32))
    y = (np.arange(n) % 2).astype(float)
    x[y == 1, 13:19, 13:19, channel] += 4.0
    return x, y


def direct_embedding(params, x):
    """Independent forward pass: explicit window sums via sliding views."""
    def conv(a, w, b):
        ap = np.pad(a, ((0, 0), (1, 1), (1, 1), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(ap, (3, 3), axis=(1, 2))  # (n, h, w, c, 3, 3)
        return np.einsum("nhwcij,ijco->nhwo", win, w) + b

    relu = lambda a: np.maximum(a, 0)  # noqa: E731
    a = relu(conv(x, params["stem_w"], params["stem_b"]))
    a = relu(a + conv(relu(conv(a, params["b1c1_w"], params["b1c1_b"])), params["b1c2_w"], params["b1c2_b"]))
    n, h, w, c = a.shape
    a = a.reshape(n, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))
    a = relu(a + conv(relu(conv(a, params["b2c1_w"], params["b2c1_b"])), params["b2c2_w"], params["b2c2_b"]))
    return a.mean(axis=(1, 2))


def test_zero_patch_zero_head_is_half():
    net = PatchCNN.init(TrainConfig())
    p, emb = net.forward(np.zeros((1, *SHAPE)))
    assert p.tolist() == [0.5] and emb.shape == (1, EMBED_DIM)


def test_forward_deterministic_and_in_range(rng):
    net = PatchCNN.init(TrainConfig(zero_head_init=False, dtype="float64"), rng)
    x = rand_patches(rng, 2)
    a, b = net.forward(x[[0, 0]])
    assert a[0] == a[1] and np.array_equal(b[0], b[1])
    p, _ = net.forward(x)
    assert np.all((p > 0) & (p < 1))


def test_shape_mismatch_rejected():
    net = PatchCNN.init()
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 32, 32, 32)))
    with pytest.raises(ValueError):
        net.forward(np.zeros((32, 32, 33)))


def test_parameter_count_fixed():
    net = PatchCNN.init()
    n = sum(v.size for v in net.params.values())
    assert n == (9 * 33 * 16 + 16) + 4 * (9 * 16 * 16 + 16) + 16 + 1
    fusion = FusionNet.init()
    assert fusion.params["fuse1_w"].shape == (16 + 21, 32) and fusion.params["fuse2_w"].shape == (32, 1)


def test_embedding_matches_direct_recomputation(rng):
    net = PatchCNN.init(TrainConfig(dtype="float64"), rng)
    x = rand_patches(rng, 3)
    emb, _ = trunk_forward(net.params, x)
    np.testing.assert_allclose(emb, direct_embedding(net.params, x), rtol=1e-10, atol=1e-12)


def test_residual_block_identity_when_convs_zero(rng):
    x = np.abs(rng.normal(size=(2, 8, 8, 16)))  # post-ReLU activations are non-negative
    params = {f"b1c{i}_{s}": np.zeros((3, 3, 16, 16) if s == "w" else 16) for i in (1, 2) for s in "wb"}
    out, _ = residual_block(x, params, "b1")
    assert np.array_equal(out, x)


def test_pooling_erases_flips(rng):
    a = rng.normal(size=(2, 16, 16, 16))
    g = global_avg_pool(a)
    for flipped in (a[:, ::-1], a[:, :, ::-1], a[:, ::-1, ::-1]):
        np.testing.assert_allclose(global_avg_pool(flipped), g, rtol=1e-12)


def test_embedding_flip_equivariance(rng):
    # flipping the input and every kernel the same way leaves the pooled embedding unchanged
    net = PatchCNN.init(TrainConfig(dtype="float64"), rng)
    x = rand_patches(rng, 2)
    flipped = {k: (v[:, ::-1].copy() if k.endswith("_w") else v) for k, v in net.params.items()}
    a, _ = trunk_forward(net.params, x)
    b, _ = trunk_forward(flipped, x[:, :, ::-1].copy())
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", ["patch_cnn", "fusion_net"])
def test_gradients_double_precision(rng, kind):
    cfg = TrainConfig(dtype="float64", zero_head_init=False)
    model = PatchCNN.init(cfg, rng) if kind == "patch_cnn" else FusionNet.init(cfg, rng=rng)
    x = rand_patches(rng, 4)
    y = np.array([0.0, 1.0, 1.0, 0.0])
    tab = rng.normal(size=(4, 21)) if kind == "fusion_net" else None
    assert patch_grad_check(model, x, y, tab, 240, 1e-6) < 1e-5


@pytest.mark.parametrize("kind", ["patch_cnn", "fusion_net"])
def test_gradients_single_precision(rng, kind):
    # analytic float32 gradients against finite differences of the same net in float64
    cfg = TrainConfig(dtype="float32", zero_head_init=False)
    model = PatchCNN.init(cfg, rng) if kind == "patch_cnn" else FusionNet.init(cfg, rng=rng)
    x = rand_patches(rng, 4, np.float32)
    y = np.array([1.0, 0.0, 1.0, 0.0], dtype=np.float32)
    tab = rng.normal(size=(4, 21)).astype(np.float32) if kind == "fusion_net" else None
    assert patch_grad_check(model, x, y, tab, 300, 1e-6, reference=as_float64(model)) < 1e-3


def test_frozen_trunk_gives_head_grads_only(rng):
    model = FusionNet.init(TrainConfig(dtype="float64", zero_head_init=False), rng=rng)
    x, tab, y = rand_patches(rng, 4), rng.normal(size=(4, 21)), np.array([0.0, 1.0, 0.0, 1.0])
    _, frozen = model.loss_and_grads(x, y, tab, freeze_trunk=True)
    assert set(frozen) == {"fuse1_w", "fuse1_b", "fuse2_w", "fuse2_b"}
    for key, g in frozen.items():
        num = central_diff(lambda: model.loss_and_grads(x, y, tab)[0], model.params, key, range(min(g.size, 50)), 1e-6)
        assert max_rel(g.reshape(-1)[:len(num)], num) < 1e-5
    _, full = model.loss_and_grads(x, y, tab)
    for name in TRUNK_CONVS:
        assert np.any(full[f"{name}_w"] != 0)


def test_planted_blob_is_learned(rng):
    x, y = planted(rng)
    model = train_patch_net(x, y, TrainConfig(epochs=20, batch_size=8, seed=1))
    assert compute_metrics(y.astype(int), threshold(model.predict_proba(x))).f1 >= 0.95


def test_training_order_independent(rng):
    x, y = planted(rng, n=24)
    recs = [RasterPatch(i + 1, x[i]) for i in range(24)]
    cfg = TrainConfig(epochs=2, batch_size=8, seed=3)
    a = train_patch_net(recs, y, cfg)
    perm = rng.permutation(24)
    b = train_patch_net([recs[i] for i in perm], y[perm], cfg)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_fusion_training_and_round_trip(rng):
    x, y = planted(rng, n=32)
    tab = rng.normal(size=(32, 21))
    model = train_patch_net(x, y, TrainConfig(epochs=2, batch_size=16), tabular=tab)
    again = model_from_dict(json.loads(dumps_model(model)))
    assert again.predict_proba(x, tab).tobytes() == model.predict_proba(x, tab).tobytes()
    frozen = train_patch_net(x, y, TrainConfig(epochs=2, batch_size=16, freeze_trunk=True), tabular=tab)
    init = FusionNet.init(TrainConfig(), tabular_dim=21, rng=np.random.default_rng(0))
    assert np.array_equal(frozen.params["stem_w"], init.params["stem_w"])


def test_non_finite_loss_aborts_with_batch_index(rng):
    x, y = planted(rng, n=16)
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError, match="batch"):
        train_patch_net(x, y, TrainConfig(epochs=3, batch_size=8, learning_rate=1e38, zero_head_init=False))


def test_non_binary_labels_rejected(rng):
    x, _ = planted(rng, n=4)
    with pytest.raises(ValueError):
        train_patch_net(x, np.array([0, 1, 2, 0]))
