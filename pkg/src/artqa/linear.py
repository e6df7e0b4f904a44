"""From-scratch linear models trained by seeded per-sample SGD.

Both the binary classifier and the multiclass scorer use the convention
``z = w . x - b`` so a positive bias pushes scores down. Weights start at
zero so training is deterministic given a seed and symmetric under label
flips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    seed: int = 0


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-z))


def log_loss(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float) -> float:
    p = sigmoid(X @ w - b)
    eps = 1e-12
    return float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))


def sgd_logistic(
    X: np.ndarray, y: np.ndarray, config: TrainConfig
) -> tuple[np.ndarray, float, list[float]]:
    """Per-sample SGD on log loss; returns (weights, bias, per-epoch loss trace).

    Zero epochs returns the zero initialization unchanged.
    """
    n, d = X.shape
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for i in order:
            p = float(sigmoid(float(X[i] @ w) - b))
            g = p - float(y[i])
            w -= config.learning_rate * g * X[i]
            b -= config.learning_rate * (-g)
        trace.append(log_loss(X, y, w, b))
    return w, b, trace


def sgd_softmax(
    X: np.ndarray, y: np.ndarray, n_classes: int, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Multinomial logistic regression by per-sample SGD.

    Returns (W of shape [n_classes, d], biases of shape [n_classes], loss trace).
    """
    n, d = X.shape
    W = np.zeros((n_classes, d), dtype=np.float64)
    b = np.zeros(n_classes, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for i in order:
            logits = W @ X[i] + b
            logits -= logits.max()
            p = np.exp(logits)
            p /= p.sum()
            p[y[i]] -= 1.0
            W -= config.learning_rate * np.outer(p, X[i])
            b -= config.learning_rate * p
        trace.append(_softmax_loss(X, y, W, b))
    return W, b, trace


def _softmax_loss(X: np.ndarray, y: np.ndarray, W: np.ndarray, b: np.ndarray) -> float:
    logits = X @ W.T + b
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(len(y)), y]))
