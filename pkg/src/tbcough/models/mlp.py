"""Five-hidden-layer ReLU perceptron with a sigmoid output, trained by Adam."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import MLP_ALLOWED_WIDTHS, TrainedModel, check_xy
from .logistic import sigmoid

N_HIDDEN = 5
EPOCHS = 200
BATCH_SIZE = 32
LEARNING_RATE = 1e-3
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


def check_widths(widths, strict=True):
    widths = [int(w) for w in widths]
    if len(widths) != N_HIDDEN:
        raise ConfigError(f"MLP needs {N_HIDDEN} hidden layers, got {len(widths)}")
    if any(b >= a for a, b in zip(widths, widths[1:])):
        raise ConfigError(f"MLP widths must be strictly decreasing: {widths}")
    if strict and any(w not in MLP_ALLOWED_WIDTHS for w in widths):
        raise ConfigError(f"MLP widths must come from {MLP_ALLOWED_WIDTHS}: {widths}")
    return widths


def init_params(n_in, widths, rng):
    sizes = [n_in, *widths, 1]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(rng.uniform(-bound, bound, size=fan_out))
    return params


def forward(params, X):
    """Return (output logits, list of layer inputs, list of pre-activations)."""
    acts, pres = [X], []
    h = X
    n_layers = len(params) // 2
    for i in range(n_layers):
        z = h @ params[2 * i] + params[2 * i + 1]
        pres.append(z)
        if i < n_layers - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
    return pres[-1][:, 0], acts, pres


def mlp_loss_grad(params, X, y, alpha):
    """Mean cross-entropy + alpha/(2n) * sum of squared weights (biases unpenalised)."""
    n = X.shape[0]
    z, acts, pres = forward(params, X)
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    loss += alpha / (2.0 * n) * sum(np.sum(params[i] ** 2) for i in range(0, len(params), 2))
    grads = [None] * len(params)
    delta = ((sigmoid(z) - y) / n)[:, None]
    for i in range(len(params) // 2 - 1, -1, -1):
        W = params[2 * i]
        grads[2 * i] = acts[i].T @ delta + (alpha / n) * W
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ W.T) * (pres[i - 1] > 0)
    return loss, grads


def train_mlp(X, y, alpha: float = 1e-4, widths=(256, 128, 64, 32, 16), seed: int = 0,
              epochs: int = EPOCHS, batch_size: int = BATCH_SIZE,
              learning_rate: float = LEARNING_RATE, strict_widths: bool = True) -> TrainedModel:
    X, y = check_xy(X, y)
    widths = check_widths(widths, strict_widths)
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], widths, rng)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grads = mlp_loss_grad(params, X[idx], y[idx], alpha)
            step += 1
            c1 = 1.0 - BETA1 ** step
            c2 = 1.0 - BETA2 ** step
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= BETA1
                mi += (1.0 - BETA1) * g
                vi *= BETA2
                vi += (1.0 - BETA2) * g * g
                p -= learning_rate * (mi / c1) / (np.sqrt(vi / c2) + ADAM_EPS)
    hp = {"alpha": alpha, "widths": list(widths)}
    if epochs != EPOCHS:
        hp["epochs"] = epochs
    if batch_size != BATCH_SIZE:
        hp["batch_size"] = batch_size
    if learning_rate != LEARNING_RATE:
        hp["learning_rate"] = learning_rate
    return TrainedModel("MLP", hp, seed, X.shape[1],
                        {f"p{i:02d}": p for i, p in enumerate(params)})


def _param_list(params):
    return [params[k] for k in sorted(params)]


def predict_mlp(params, X):
    z, _, _ = forward(_param_list(params), X)
    return sigmoid(z)
