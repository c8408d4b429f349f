"""L2-regularised logistic regression fitted with L-BFGS."""

from __future__ import annotations

import numpy as np
from scipy import optimize

from .base import TrainedModel, check_xy

GTOL = 1e-6
MAX_ITER = 5000


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lr_loss_grad(theta, X, y, C):
    """Mean cross-entropy + ||w||^2 / (2 C n); bias (last entry of theta) unpenalised."""
    n = X.shape[0]
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + (w @ w) / (2.0 * C * n)
    r = sigmoid(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r / n + w / (C * n)
    grad[-1] = r.mean()
    return loss, grad


def train_lr(X, y, C: float = 1.0, seed: int = 0, history: list | None = None) -> TrainedModel:
    """Fit by L-BFGS until the gradient inf-norm drops below 1e-6 (or 5000 iterations).

    ``history``, if given, receives the loss after every accepted step.
    """
    X, y = check_xy(X, y)
    if C <= 0:
        raise ValueError("C must be positive")
    theta0 = np.zeros(X.shape[1] + 1)

    def cb(intermediate_result):
        if history is not None:
            history.append(float(intermediate_result.fun))

    if history is not None:
        history.append(float(lr_loss_grad(theta0, X, y, C)[0]))
    res = optimize.minimize(lr_loss_grad, theta0, args=(X, y, C), jac=True, method="L-BFGS-B",
                            callback=cb,
                            options=dict(maxiter=MAX_ITER, gtol=GTOL, ftol=1e-15, maxcor=10))
    theta = res.x
    return TrainedModel("LR", {"C": C}, seed, X.shape[1],
                        {"coef": theta[:-1].copy(), "intercept": theta[-1:].copy()})


def decision_function_lr(params, X):
    return X @ params["coef"] + params["intercept"][0]


def predict_lr(params, X):
    return sigmoid(decision_function_lr(params, X))
