"""Reference classifiers trained on time-averaged indicator vectors."""
from __future__ import annotations

import numpy as np

from ..fed import FederationConfig, federate_readout
from ..rc import loss, sigmoid


def time_averaged(samples) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        return np.zeros((0, 0)), np.zeros(0)
    x = np.stack([s.sequence.mean(axis=0) for s in samples])
    y = np.array([s.label for s in samples], dtype=float)
    return x, y


class KnnClassifier:
    """Majority vote of the k nearest training points (Euclidean); ties go to label 0."""

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._x = self._y = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "KnnClassifier":
        self._x = np.asarray(x, dtype=float)
        self._y = np.asarray(y, dtype=int)
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d2 = (np.sum(x ** 2, axis=1)[:, None] - 2 * x @ self._x.T + np.sum(self._x ** 2, axis=1)[None, :])
        k = min(self.k, len(self._y))
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        votes = self._y[nearest].sum(axis=1)
        return (2 * votes > k).astype(int)

    def accuracy(self, x, y) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y, dtype=int)))


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def train_perceptron(per_ue: list, fed_cfg: FederationConfig, val=None):
    """Single-layer sigmoid perceptron on time-averaged features, federated like the ESN readout.

    Returns ``(weights, round_logs)``.
    """
    pairs = [time_averaged(d) for d in per_ue]
    designs = [_with_bias(x) for x, _ in pairs]
    labels = [y for _, y in pairs]
    val_pair = None
    if val:
        xv, yv = time_averaged(val)
        val_pair = (_with_bias(xv), yv)
    w0 = np.zeros(designs[0].shape[1])
    w, logs, _ = federate_readout(w0, designs, labels, fed_cfg, val_pair)
    return w, logs


def perceptron_proba(w: np.ndarray, samples) -> np.ndarray:
    x, _ = time_averaged(samples)
    return sigmoid(_with_bias(x) @ w)


def perceptron_scores(w: np.ndarray, samples) -> tuple[float, float]:
    """(loss, accuracy) on a labeled set."""
    p = perceptron_proba(w, samples)
    y = np.array([s.label for s in samples], dtype=float)
    return loss(p, y), float(np.mean((p > 0.5) == (y > 0.5)))


def rounds_to_reach(curve, target: float) -> int | None:
    """First 1-based round whose loss is at or below ``target``."""
    for i, v in enumerate(curve):
        if v <= target:
            return i + 1
    return None
