"""Differentiable learners and the tau-step local SGD update.

A learner works on a flat parameter vector so the protocol can quantize and
ship deltas without knowing the model structure. Two built-ins: multinomial
logistic regression (the desk-scale default) and a one-hidden-layer ReLU
MLP. Both expose analytic gradients that are validated against central
finite differences in the tests.
"""

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "Learner",
    "LogisticRegression",
    "Mlp",
    "LocalSGDConfig",
    "SgdOptimizer",
    "AdamOptimizer",
    "make_optimizer",
    "local_update",
    "evaluate",
]


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class Learner:
    """Flat-parameter model interface: loss, stochastic gradient, predict."""

    dim: int
    num_classes: int

    def loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class LogisticRegression(Learner):
    """Multinomial logistic regression with bias, mean cross-entropy loss."""

    def __init__(self, num_features: int, num_classes: int):
        self.num_features = num_features
        self.num_classes = num_classes
        self.dim = num_classes * (num_features + 1)

    def _unflatten(self, theta):
        w = theta[: self.num_classes * self.num_features]
        W = w.reshape(self.num_classes, self.num_features)
        b = theta[self.num_classes * self.num_features:]
        return W, b

    def _logits(self, theta, X):
        W, b = self._unflatten(theta)
        return X @ W.T + b

    def loss(self, theta, X, y):
        logp = _log_softmax(self._logits(theta, X))
        return float(-logp[np.arange(y.size), y].mean())

    def gradient(self, theta, X, y):
        logp = _log_softmax(self._logits(theta, X))
        p = np.exp(logp)
        p[np.arange(y.size), y] -= 1.0
        p /= y.size
        grad_W = p.T @ X
        grad_b = p.sum(axis=0)
        return np.concatenate([grad_W.reshape(-1), grad_b])

    def predict(self, theta, X):
        return np.argmax(self._logits(theta, X), axis=1)

    def init_params(self, rng):
        return np.zeros(self.dim)


class Mlp(Learner):
    """One hidden ReLU layer followed by a softmax readout."""

    def __init__(self, num_features: int, hidden: int, num_classes: int):
        self.num_features = num_features
        self.hidden = hidden
        self.num_classes = num_classes
        self.dim = hidden * (num_features + 1) + num_classes * (hidden + 1)

    def _unflatten(self, theta):
        h, f, c = self.hidden, self.num_features, self.num_classes
        parts = np.split(theta, [h * f, h * f + h, h * f + h + c * h])
        return (parts[0].reshape(h, f), parts[1],
                parts[2].reshape(c, h), parts[3])

    def _forward(self, theta, X):
        W1, b1, W2, b2 = self._unflatten(theta)
        pre = X @ W1.T + b1
        act = np.maximum(pre, 0.0)
        return pre, act, act @ W2.T + b2

    def loss(self, theta, X, y):
        _, _, logits = self._forward(theta, X)
        logp = _log_softmax(logits)
        return float(-logp[np.arange(y.size), y].mean())

    def gradient(self, theta, X, y):
        pre, act, logits = self._forward(theta, X)
        W1, b1, W2, b2 = self._unflatten(theta)
        p = np.exp(_log_softmax(logits))
        p[np.arange(y.size), y] -= 1.0
        p /= y.size
        grad_W2 = p.T @ act
        grad_b2 = p.sum(axis=0)
        back = (p @ W2) * (pre > 0.0)
        grad_W1 = back.T @ X
        grad_b1 = back.sum(axis=0)
        return np.concatenate(
            [grad_W1.reshape(-1), grad_b1, grad_W2.reshape(-1), grad_b2])

    def predict(self, theta, X):
        return np.argmax(self._forward(theta, X)[2], axis=1)

    def init_params(self, rng):
        h, f, c = self.hidden, self.num_features, self.num_classes
        W1 = rng.standard_normal((h, f)) * np.sqrt(2.0 / f)
        W2 = rng.standard_normal((c, h)) * np.sqrt(1.0 / h)
        return np.concatenate(
            [W1.reshape(-1), np.zeros(h), W2.reshape(-1), np.zeros(c)])


LearningRate = Union[float, Callable[[int, int], float]]


@dataclass
class LocalSGDConfig:
    tau: int = 1
    batch_size: int = 32
    learning_rate: LearningRate = 0.1
    optimizer_kind: str = "sgd"  # "sgd" or "adam"

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer_kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer_kind {self.optimizer_kind!r}")

    def lr(self, t: int, i: int) -> float:
        if callable(self.learning_rate):
            return float(self.learning_rate(t, i))
        return float(self.learning_rate)


class SgdOptimizer:
    def step(self, theta, grad, lr):
        return theta - lr * grad


@dataclass
class AdamOptimizer:
    """Standard ADAM; moment state persists for a device across rounds."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    steps: int = 0

    def step(self, theta, grad, lr):
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.steps += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.steps)
        v_hat = self.v / (1.0 - self.beta2**self.steps)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str):
    return AdamOptimizer() if kind == "adam" else SgdOptimizer()


def local_update(learner: Learner, theta_start: np.ndarray, X: np.ndarray,
                 y: np.ndarray, cfg: LocalSGDConfig, rng: np.random.Generator,
                 optimizer=None, round_index: int = 0) -> np.ndarray:
    """Run tau local steps from theta_start and return the parameter delta.

    Each step draws a fresh batch uniformly without replacement (capped at
    the shard size). The optimizer is mutated in place when it carries state.
    """
    if y.size == 0:
        raise ValueError("device has no data")
    if optimizer is None:
        optimizer = SgdOptimizer()
    theta = theta_start.copy()
    batch = min(cfg.batch_size, y.size)
    for i in range(cfg.tau):
        idx = rng.choice(y.size, size=batch, replace=False)
        grad = learner.gradient(theta, X[idx], y[idx])
        theta = optimizer.step(theta, grad, cfg.lr(round_index, i))
    return theta - theta_start


def evaluate(learner: Learner, theta: np.ndarray, X: np.ndarray,
             y: np.ndarray) -> float:
    """Fraction of correct argmax predictions on (X, y)."""
    if y.size == 0:
        raise ValueError("test set is empty")
    return float(np.mean(learner.predict(theta, X) == y))
