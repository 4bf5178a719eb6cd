"""Minimal dense feed-forward network with exact backpropagation.

Hidden layers use ReLU (subgradient 0 at 0), the output layer is linear.
Training utilities include Adam with bias correction, a ReduceLROnPlateau
scheduler, and early stopping with best-weights restore.  Everything is
plain numpy and deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class NetworkParams:
    """Layer sizes plus one (weights, bias) pair per affine layer."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        sizes = [int(v) for v in d["layer_sizes"]]
        weights = [
            np.array(flat, dtype=float).reshape(sizes[i], sizes[i + 1])
            for i, flat in enumerate(d["weights"])
        ]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        return cls(sizes, weights, biases)


def init(layer_sizes: list[int], seed: int) -> NetworkParams:
    """He-scaled random weights (variance 2/fan_in), zero biases."""
    if len(layer_sizes) < 2 or any(w < 1 for w in layer_sizes):
        raise ValueError("layer_sizes needs >= 2 entries, all widths >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(list(layer_sizes), weights, biases)


def forward(params: NetworkParams, inputs: np.ndarray):
    """Batched forward pass.

    Args:
        params: the network.
        inputs: (batch, layer_sizes[0]) array.

    Returns:
        (outputs, cache): outputs is (batch, layer_sizes[-1]); the cache keeps
        layer activations and pre-activations for :func:`backward`.
    """
    a = np.asarray(inputs, dtype=float)
    if a.ndim != 2 or a.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"expected inputs of shape (batch, {params.layer_sizes[0]}), got {a.shape}"
        )
    activations = [a]
    pre_acts = []
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre_acts.append(z)
        a = z if layer == last else np.maximum(z, 0.0)
        activations.append(a)
    return a, {"activations": activations, "pre_acts": pre_acts}


def backward(params: NetworkParams, cache: dict, d_outputs: np.ndarray):
    """Exact gradients of (loss composed with the network) w.r.t. parameters.

    Args:
        params: the network used in the matching forward call.
        cache: activation cache from that call.
        d_outputs: dLoss/dOutputs, shape (batch, layer_sizes[-1]).

    Returns:
        (d_weights, d_biases), lists shaped like params.weights / params.biases.
    """
    delta = np.asarray(d_outputs, dtype=float)
    activations = cache["activations"]
    pre_acts = cache["pre_acts"]
    if delta.shape != pre_acts[-1].shape:
        raise ValueError("d_outputs shape does not match the cached forward pass")
    d_weights = [np.empty(0)] * len(params.weights)
    d_biases = [np.empty(0)] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        d_weights[layer] = activations[layer].T @ delta
        d_biases[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * (pre_acts[layer - 1] > 0.0)
    return d_weights, d_biases


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over all elements."""
    pred, target = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes differ")
    diff = pred - target
    return float(np.mean(diff * diff))


def dmse_dpred(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of :func:`mse`: 2 (pred - target) / N."""
    pred, target = np.asarray(pred, dtype=float), np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes differ")
    return 2.0 * (pred - target) / pred.size


@dataclass
class TrainConfig:
    """Optimization settings shared by all architectures."""

    initial_lr: float = 1e-3
    lr_factor: float = 0.5
    lr_patience: int = 10
    min_lr: float = 1e-5
    early_stop_patience: int = 20
    max_epochs: int = 1000
    batch_size: int | None = None  # None: per-architecture default
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lr_factor < 1.0:
            raise ValueError("lr_factor must be in (0, 1)")
        if self.lr_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patiences must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


class AdamState:
    """Adam accumulators mirroring a NetworkParams instance."""

    def __init__(self, params: NetworkParams, lr: float):
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]
        self.step = 0
        self.lr = lr


def adam_step(
    state: AdamState,
    params: NetworkParams,
    d_weights: list[np.ndarray],
    d_biases: list[np.ndarray],
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One in-place Adam update with bias correction.

    Raises:
        ValueError: on non-finite gradients, naming the offending layer.
    """
    for layer, g in enumerate(d_weights):
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(d_biases[layer])):
            raise ValueError(f"non-finite gradient in layer {layer}")
    state.step += 1
    t = state.step
    corr1 = 1.0 - beta1 ** t
    corr2 = 1.0 - beta2 ** t
    for pairs in (
        zip(params.weights, d_weights, state.m_w, state.v_w),
        zip(params.biases, d_biases, state.m_b, state.v_b),
    ):
        for value, grad, m, v in pairs:
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            value -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
    return params, state


class ReduceLROnPlateau:
    """Halve the learning rate after `patience` epochs without improvement.

    Improvement means the validation loss beats the best seen by more than
    `min_delta`; a reduction resets the stall counter, and the rate never
    drops below `min_lr`.
    """

    def __init__(self, factor=0.5, patience=10, min_delta=1e-8, min_lr=1e-5):
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.min_lr = min_lr
        self.best = math.inf
        self.wait = 0

    def update(self, val_loss: float, lr: float) -> float:
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.wait = 0
            return lr
        self.wait += 1
        if self.wait >= self.patience:
            self.wait = 0
            return max(lr * self.factor, self.min_lr)
        return lr


class EarlyStopping:
    """Stop after `patience` epochs without a new validation-loss minimum."""

    def __init__(self, patience=20, min_delta=0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.wait = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.best_epoch = epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience
