"""CART trees (Gini or entropy) and a bootstrap random forest."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import TrainedModel, check_xy


def n_split_features(max_features, n_features: int) -> int:
    if max_features in (None, "all"):
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(np.log2(n_features)))
    if isinstance(max_features, (int, np.integer)) and 1 <= max_features:
        return min(int(max_features), n_features)
    raise ConfigError(f"bad max_features {max_features!r}")


def impurity(p, criterion: str):
    """Node impurity from the positive-class fraction ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    if criterion == "entropy":
        q = 1.0 - p
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
        return h
    raise ConfigError(f"unknown split criterion {criterion!r}")


def best_split(X, y, features, criterion):
    """Lowest weighted child impurity over ``features``.

    Ties go to the lowest feature index, then the lowest threshold. Returns
    (feature, threshold, score) or None when no feature separates the rows.
    """
    features = np.sort(np.asarray(features))
    n = y.size
    xs = X[:, features]
    order = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, order, axis=0)
    ys = y[order]
    n_left = np.arange(1, n)[:, None].astype(np.float64)
    n_right = n - n_left
    pos_left = np.cumsum(ys, axis=0)[:-1]
    pos_right = ys.sum(axis=0) - pos_left
    score = (n_left * impurity(pos_left / n_left, criterion)
             + n_right * impurity(pos_right / n_right, criterion)) / n
    valid = xs[1:] > xs[:-1]
    score = np.where(valid, score, np.inf)
    flat = score.T.ravel()  # feature-major so argmin breaks ties by feature, then threshold
    j = int(np.argmin(flat))
    if not np.isfinite(flat[j]):
        return None
    f_pos, i = divmod(j, n - 1)
    lo, hi = xs[i, f_pos], xs[i + 1, f_pos]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return int(features[f_pos]), float(thr), float(flat[j])


def build_tree(X, y, max_depth, n_features_split, criterion, rng):
    """Grow one tree; returns parallel node arrays (feature -1 marks a leaf)."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    d = X.shape[1]
    root = new_node()
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yi = y[idx]
        value[node] = float(yi.mean())
        if depth >= max_depth or yi.min() == yi.max() or idx.size < 2:
            continue
        if n_features_split < d:
            feats = rng.choice(d, n_features_split, replace=False)
        else:
            feats = np.arange(d)
        split = best_split(X[idx], yi, feats, criterion)
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        l, r = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, l, r
        stack.append((r, idx[~go_left], depth + 1))
        stack.append((l, idx[go_left], depth + 1))
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(value))


def train_rf(X, y, n_estimators: int = 100, max_features="sqrt", max_depth: int = 6,
             criterion: str = "gini", bootstrap: bool = True, seed: int = 0) -> TrainedModel:
    X, y = check_xy(X, y)
    impurity(0.5, criterion)
    k = n_split_features(max_features, X.shape[1])
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_estimators):
        idx = rng.integers(0, y.size, y.size) if bootstrap else np.arange(y.size)
        trees.append(build_tree(X[idx], y[idx], max_depth, k, criterion, rng))
    sizes = np.array([t[0].size for t in trees], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    params = {
        "feature": np.concatenate([t[0] for t in trees]),
        "threshold": np.concatenate([t[1] for t in trees]),
        # child indices stay tree-local; offsets map them into the flat arrays
        "left": np.concatenate([t[2] for t in trees]),
        "right": np.concatenate([t[3] for t in trees]),
        "value": np.concatenate([t[4] for t in trees]),
        "offsets": offsets,
    }
    hp = {"n_estimators": n_estimators, "max_features": max_features, "max_depth": max_depth,
          "criterion": criterion}
    if not bootstrap:
        hp["bootstrap"] = False
    return TrainedModel("RF", hp, seed, X.shape[1], params)


def tree_probabilities(params, X):
    """Per-tree leaf probabilities, shape (n_trees, n_rows)."""
    off = params["offsets"]
    feature, threshold = params["feature"], params["threshold"]
    left, right, value = params["left"], params["right"], params["value"]
    out = np.empty((off.size - 1, X.shape[0]))
    rows = np.arange(X.shape[0])
    for t in range(off.size - 1):
        base = off[t]
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = feature[base + node]
            inner = f >= 0
            if not inner.any():
                break
            xv = X[rows, np.where(inner, f, 0)]
            go_left = xv <= threshold[base + node]
            nxt = np.where(go_left, left[base + node], right[base + node])
            node = np.where(inner, nxt, node)
        out[t] = value[base + node]
    return out


def predict_rf(params, X):
    return tree_probabilities(params, X).mean(axis=0)
