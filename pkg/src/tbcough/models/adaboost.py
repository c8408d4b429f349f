"""Discrete two-class SAMME boosting over decision stumps."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel, check_xy
from .logistic import sigmoid

MIN_ERROR = 1e-10


class StumpSearch:
    """Weighted-error search over all (feature, threshold, polarity) stumps.

    A stump with polarity s predicts s above the threshold and -s at or below.
    Columns are sorted once; each round only re-accumulates weights.
    """

    def __init__(self, X):
        self.X = X
        self.order = np.argsort(X, axis=0, kind="stable")
        self.xs = np.take_along_axis(X, self.order, axis=0)
        self.valid = self.xs[1:] > self.xs[:-1]

    def best(self, w, y_pm):
        n, d = self.X.shape
        if n < 2:
            return None
        ws = w[self.order]
        pos = np.where(y_pm[self.order] > 0, ws, 0.0)
        neg = ws - pos
        pos_left = np.cumsum(pos, axis=0)[:-1]
        neg_left = np.cumsum(neg, axis=0)[:-1]
        pos_total, neg_total = pos.sum(axis=0), neg.sum(axis=0)
        # polarity +1 misses positives on the left and negatives on the right
        err_plus = pos_left + (neg_total - neg_left)
        err_minus = neg_left + (pos_total - pos_left)
        err = np.stack([err_plus, err_minus], axis=-1)  # (n-1, d, 2)
        err = np.where(self.valid[..., None], err, np.inf)
        flat = err.transpose(1, 0, 2).ravel()  # feature, threshold, polarity
        j = int(np.argmin(flat))
        if not np.isfinite(flat[j]):
            return None
        f, rest = divmod(j, (n - 1) * 2)
        i, p = divmod(rest, 2)
        lo, hi = self.xs[i, f], self.xs[i + 1, f]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return int(f), float(thr), 1.0 if p == 0 else -1.0, float(flat[j])


def stump_predict(X, feature, threshold, polarity):
    return np.where(X[:, feature] > threshold, polarity, -polarity)


def train_adaboost(X, y, n_estimators: int = 50, learning_rate: float = 1.0, seed: int = 0,
                   errors: list | None = None) -> TrainedModel:
    """Stops early when a stump's weighted error reaches 0.5 (not kept) or 0 (kept).

    ``errors``, if given, receives each kept stump's weighted error.
    """
    X, y = check_xy(X, y)
    y_pm = 2.0 * y - 1.0
    n = y.size
    w = np.full(n, 1.0 / n)
    search = StumpSearch(X)
    feats, thrs, pols, alphas = [], [], [], []
    for _ in range(n_estimators):
        found = search.best(w, y_pm)
        if found is None:
            break
        f, thr, pol, _ = found
        # recompute directly: the cumulative-sum error can carry cancellation residue
        miss = stump_predict(X, f, thr, pol) != y_pm
        err = float(w[miss].sum() / w.sum())
        if err >= 0.5:
            break
        e = max(err, MIN_ERROR)
        alpha = learning_rate * np.log((1.0 - e) / e)
        feats.append(f)
        thrs.append(thr)
        pols.append(pol)
        alphas.append(alpha)
        if errors is not None:
            errors.append(err)
        if err <= 0.0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
    params = {"feature": np.array(feats, dtype=np.int64), "threshold": np.array(thrs),
              "polarity": np.array(pols), "alpha": np.array(alphas)}
    return TrainedModel("AB", {"n_estimators": n_estimators, "learning_rate": learning_rate},
                        seed, X.shape[1], params)


def decision_function_adaboost(params, X):
    margin = np.zeros(X.shape[0])
    for f, thr, pol, a in zip(params["feature"], params["threshold"], params["polarity"],
                              params["alpha"]):
        margin += a * stump_predict(X, f, thr, pol)
    return margin


def predict_adaboost(params, X):
    """Logistic link on the boosted margin."""
    return sigmoid(decision_function_adaboost(params, X))
