"""Multilayer perceptron in NumPy with full-batch Adam training.

Hidden layers use the rectifier; the output layer is either a softmax
(classification, cross-entropy loss) or linear (regression, mean squared
error). Training is full-batch so results do not depend on sample order and
are bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError

log = logging.getLogger(__name__)


@dataclass
class Mlp:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_mode: str = "softmax"

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "Mlp":
        return Mlp(list(self.layer_dims), [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.output_mode)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs_per_round: int = 500
    max_rounds: int = 20
    seed: int = 0
    loss: str = "cross_entropy"
    plateau_tol: float = 1e-10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.max_epochs_per_round > 0 and self.max_rounds > 0):
            raise ValueError("learning rate and epoch budgets must be positive")
        if self.loss not in ("cross_entropy", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainResult:
    net: Mlp
    converged: bool  # perfect match (classifier) or plateau reached (regressor)
    epochs: int
    final_loss: float
    accuracy: float = float("nan")
    loss_history: list[float] = field(default_factory=list, repr=False)


def mlp_init(layer_dims, output_mode: str = "softmax", seed: int = 0) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer dims {dims}")
    if output_mode not in ("softmax", "linear"):
        raise ValueError(f"unknown output mode {output_mode!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases, output_mode)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(net: Mlp, x: np.ndarray):
    acts = [x]
    pre = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        pre.append(z)
        if i < len(net.weights) - 1:
            acts.append(np.maximum(z, 0.0))
    out = _softmax(pre[-1]) if net.output_mode == "softmax" else pre[-1]
    return acts, pre, out


def forward(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != net.layer_dims[0]:
        raise DimensionMismatchError(f"input width {x.shape[-1]} != {net.layer_dims[0]}")
    out = _forward_cache(net, np.atleast_2d(x))[2]
    return out[0] if single else out


def _targets(net: Mlp, targets, n: int, loss: str) -> np.ndarray:
    t = np.asarray(targets)
    k = net.layer_dims[-1]
    if loss == "cross_entropy" and t.ndim == 1:
        if t.shape[0] != n or t.min() < 0 or t.max() >= k:
            raise DimensionMismatchError("class labels must be in [0, K) with one per sample")
        return np.eye(k)[t.astype(int)]
    t = np.asarray(t, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape != (n, k):
        raise DimensionMismatchError(f"targets shape {t.shape} != {(n, k)}")
    return t


def loss_grad(net: Mlp, inputs, targets, loss: str = "cross_entropy"):
    """Full-batch mean loss and its gradient, ordered like ``net.parameters()``.

    Cross-entropy expects a softmax network and class labels or probability
    rows; mse averages over samples and outputs.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != net.layer_dims[0]:
        raise DimensionMismatchError(f"input width {x.shape[1]} != {net.layer_dims[0]}")
    n = x.shape[0]
    y = _targets(net, targets, n, loss)
    acts, pre, out = _forward_cache(net, x)
    if loss == "cross_entropy":
        if net.output_mode != "softmax":
            raise ValueError("cross-entropy requires a softmax output layer")
        value = -float(np.sum(y * np.log(np.maximum(out, 1e-300)))) / n
        delta = (out - y) / n
    elif loss == "mse":
        if net.output_mode == "softmax":
            raise ValueError("mse is only wired for linear outputs")
        diff = out - y
        value = float(np.mean(diff * diff))
        delta = 2.0 * diff / diff.size
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads = [None] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return value, grads


class _Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def accuracy(net: Mlp, inputs, labels) -> float:
    pred = np.argmax(forward(net, np.atleast_2d(inputs)), axis=1)
    return float(np.mean(pred == np.asarray(labels)))


def train_classifier(inputs, labels, layer_dims, cfg: TrainConfig) -> TrainResult:
    """Train until every training sample is classified correctly.

    Rounds of ``max_epochs_per_round`` Adam epochs are followed by an
    accuracy check; training stops at a perfect match or after
    ``max_rounds``. A missing perfect match is reported via ``converged``.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    labels = np.asarray(labels, dtype=int)
    net = mlp_init(layer_dims, "softmax", cfg.seed)
    params = net.parameters()
    opt = _Adam(params, cfg)
    history = []
    epochs = 0
    acc = accuracy(net, x, labels)
    for _ in range(cfg.max_rounds):
        for _ in range(cfg.max_epochs_per_round):
            value, grads = loss_grad(net, x, labels, "cross_entropy")
            opt.step(params, grads)
            history.append(value)
            epochs += 1
        acc = accuracy(net, x, labels)
        if acc == 1.0:
            break
    final = loss_grad(net, x, labels, "cross_entropy")[0]
    if acc < 1.0:
        log.warning("classifier reached %.4f training accuracy, no perfect match", acc)
    return TrainResult(net, acc == 1.0, epochs, final, acc, history)


def train_regressor(inputs, targets, layer_dims, cfg: TrainConfig) -> TrainResult:
    """Full-batch Adam on mse with a linear output; stops on a loss plateau."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    net = mlp_init(layer_dims, "linear", cfg.seed)
    params = net.parameters()
    opt = _Adam(params, cfg)
    budget = cfg.max_epochs_per_round * cfg.max_rounds
    window = 100
    history = []
    plateau = False
    for epoch in range(budget):
        value, grads = loss_grad(net, x, targets, "mse")
        history.append(value)
        if value == 0.0:
            plateau = True
            break
        if epoch >= window:
            old = history[-1 - window]
            if old - value <= cfg.plateau_tol * old:
                plateau = True
                break
        opt.step(params, grads)
    final = loss_grad(net, x, targets, "mse")[0]
    return TrainResult(net, plateau, len(history), final, loss_history=history)
