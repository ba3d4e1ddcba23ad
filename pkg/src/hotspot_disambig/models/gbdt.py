"""Second-order (Newton) gradient-boosted trees for binary logistic loss.

Exact greedy split search over a per-tree random feature subset, with learned
default directions for missing values. Positive examples have their gradient
and hessian scaled by ``scale_pos_weight``.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .common import sigmoid


@dataclass(frozen=True)
class GBDTConfig:
    learning_rate: float = 0.1
    max_depth: int = 12
    feature_subsample: float = 0.8
    scale_pos_weight: float = 10.0
    n_rounds: int = 100
    lambda_reg: float = 1.0
    gamma: float = 0.0
    min_child_hessian: float = 1.0


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if len(depth) else 0

    def predict(self, X) -> np.ndarray:
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return self.value[node]
            x = X[rows, np.where(active, feat, 0)]
            go_left = np.where(np.isnan(x), self.missing_left[node], x < self.threshold[node])
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(active, nxt, node)

    def to_nested(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"leaf": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "missing_left": bool(self.missing_left[i]),
            "left": self.to_nested(int(self.left[i])),
            "right": self.to_nested(int(self.right[i])),
        }

    @classmethod
    def from_nested(cls, root: dict) -> "Tree":
        cols = {k: [] for k in ("feature", "threshold", "missing_left", "left", "right", "value")}

        def add(node):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(0)
            if "leaf" in node:
                cols["feature"][i], cols["value"][i] = -1, node["leaf"]
                cols["threshold"][i] = 0.0
                return i
            cols["feature"][i] = node["feature"]
            cols["threshold"][i] = node["threshold"]
            cols["missing_left"][i] = node["missing_left"]
            cols["value"][i] = 0.0
            cols["left"][i] = add(node["left"])
            cols["right"][i] = add(node["right"])
            return i

        add(root)
        return cls(
            np.array(cols["feature"], dtype=np.int64),
            np.array(cols["threshold"], dtype=np.float64),
            np.array(cols["missing_left"], dtype=bool),
            np.array(cols["left"], dtype=np.int64),
            np.array(cols["right"], dtype=np.int64),
            np.array(cols["value"], dtype=np.float64),
        )


@dataclass
class GBDTModel:
    base_score: float
    trees: list
    config: GBDTConfig = field(default_factory=GBDTConfig)
    n_features: int = 0
    standardizer = None
    model_type = "gbdt"

    def decision_function(self, X, n_trees: int = None):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.n_features)
        f = np.full(X.shape[0], self.base_score)
        for tree in self.trees[:n_trees]:
            f += self.config.learning_rate * tree.predict(X)
        return f

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def params_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "n_features": self.n_features,
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_params(cls, params, hp, standardizer=None):
        return cls(
            float(params["base_score"]),
            [Tree.from_nested(t) for t in params["trees"]],
            GBDTConfig(**hp),
            int(params["n_features"]),
        )


def weighted_logloss(f, y, spw: float) -> float:
    """Training objective: sum of class-weighted logistic losses."""
    w = np.where(y == 1, spw, 1.0)
    return float(np.sum(w * (np.logaddexp(0.0, f) - y * f)))


def prior_log_odds(y, spw: float) -> float:
    y = np.asarray(y, dtype=np.float64)
    w = np.where(y == 1, spw, 1.0)
    p = float(np.sum(w * y) / np.sum(w))
    p = min(max(p, 1e-6), 1.0 - 1e-6)
    return math.log(p / (1.0 - p))


def _best_split(Xn, g, h, feats, cfg: GBDTConfig):
    """Best (gain, feature, threshold, missing_left) for one node, or None.

    Ties are broken by lowest feature index, then lowest threshold, then
    missing-left before missing-right.
    """
    lam, mch = cfg.lambda_reg, cfg.min_child_hessian
    n = Xn.shape[0]
    missing = np.isnan(Xn)
    vals = np.where(missing, np.inf, Xn)
    order = np.argsort(vals, axis=0, kind="stable")
    v = np.take_along_axis(vals, order, axis=0)
    gs = g[order]
    hs = h[order]
    cg = np.cumsum(gs, axis=0)[:-1]
    ch = np.cumsum(hs, axis=0)[:-1]
    g_tot, h_tot = g.sum(), h.sum()
    g_miss = np.where(missing, g[:, None], 0.0).sum(axis=0)
    h_miss = np.where(missing, h[:, None], 0.0).sum(axis=0)
    valid = (v[:-1] < v[1:]) & np.isfinite(v[1:])
    if n < 2 or not valid.any():
        return None
    parent = g_tot**2 / (h_tot + lam)

    best = None
    for miss_left in (True, False):
        gl = cg + (g_miss if miss_left else 0.0)
        hl = ch + (h_miss if miss_left else 0.0)
        gr, hr = g_tot - gl, h_tot - hl
        gain = 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam) - parent) - cfg.gamma
        ok = valid & (hl >= mch) & (hr >= mch)
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        top = gain.max()
        if not top > 0:
            continue
        # candidate cells: column order == ascending feature index, row order == ascending threshold
        rows, cols = np.nonzero(gain == top)
        pick = np.lexsort((rows, cols))[0]
        j, c = rows[pick], cols[pick]
        thr = 0.5 * (v[j, c] + v[j + 1, c])
        if not thr > v[j, c]:
            thr = v[j + 1, c]
        cand = (float(top), int(feats[c]), float(thr), miss_left)
        if best is None or cand[0] > best[0] or (cand[0] == best[0] and (cand[1], cand[2]) < (best[1], best[2])):
            best = cand
    return best


def build_tree(X, g, h, feats, cfg: GBDTConfig) -> Tree:
    feature, threshold, missing_left, left, right, value = [], [], [], [], [], []

    def new_node():
        for col, v in ((feature, -1), (threshold, 0.0), (missing_left, False), (left, -1), (right, -1), (value, 0.0)):
            col.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        gn, hn = g[idx], h[idx]
        split = None
        if depth < cfg.max_depth and len(idx) >= 2:
            split = _best_split(X[np.ix_(idx, feats)], gn, hn, feats, cfg)
        if split is None:
            value[node] = -gn.sum() / (hn.sum() + cfg.lambda_reg)
            continue
        _, f, thr, miss_left = split
        x = X[idx, f]
        go_left = np.where(np.isnan(x), miss_left, x < thr)
        feature[node], threshold[node], missing_left[node] = f, thr, miss_left
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], idx[~go_left], depth + 1))
        stack.append((left[node], idx[go_left], depth + 1))
    return Tree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
        np.array(missing_left, dtype=bool), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(value, dtype=np.float64),
    )


def train_gbdt(X, y, hp: GBDTConfig = GBDTConfig(), seed: int = 0, loss_trace: list = None) -> GBDTModel:
    """Boost ``hp.n_rounds`` trees. If ``loss_trace`` is a list, the weighted
    training loss before the first round and after every round is appended."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.isinf(X).any():
        raise ValueError("X contains infinite values (NaN is allowed as missing)")
    n, d = X.shape
    spw = hp.scale_pos_weight
    base = prior_log_odds(y, spw) if n else 0.0
    model = GBDTModel(base, [], hp, d)
    f = np.full(n, base)
    if loss_trace is not None:
        loss_trace.append(weighted_logloss(f, y, spw))
    if n == 0 or len(np.unique(y)) < 2:
        if hp.n_rounds > 0:
            warnings.warn("training labels contain a single class; model is the prior only", stacklevel=2)
        return model
    rng = np.random.default_rng(seed)
    k = min(d, max(1, math.ceil(hp.feature_subsample * d)))
    w = np.where(y == 1, spw, 1.0)
    for _ in range(hp.n_rounds):
        p = sigmoid(f)
        g = (p - y) * w
        h = p * (1.0 - p) * w
        feats = np.arange(d) if k == d else np.sort(rng.choice(d, size=k, replace=False))
        tree = build_tree(X, g, h, feats, hp)
        model.trees.append(tree)
        f += hp.learning_rate * tree.predict(X)
        if loss_trace is not None:
            loss_trace.append(weighted_logloss(f, y, spw))
    return model


def config_from(hp) -> GBDTConfig:
    if isinstance(hp, GBDTConfig):
        return hp
    return dataclasses.replace(GBDTConfig(), **(hp or {}))
