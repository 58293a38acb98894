"""Minimal dense feed-forward kernel: exact backprop and minibatch SGD.

Everything is float64.  Gradients are derived by hand from the mean-squared
reconstruction loss and are checked against central finite differences in the
test suite; keep any change here in sync with those checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("sigmoid", "linear")


class DimensionMismatch(Exception):
    """Input/parameter shapes disagree; raised before any arithmetic."""

    def __init__(self, expected, actual, context: str = ""):
        self.expected = expected
        self.actual = actual
        where = f" in {context}" if context else ""
        super().__init__(f"dimension mismatch{where}: expected {expected}, got {actual}")


class NonFiniteParameter(Exception):
    """A parameter left the finite range during training (divergent step size)."""


@dataclass
class NeuralLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray   # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    layers: list[NeuralLayer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameter_count(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int

    def __post_init__(self):
        # 0 is allowed: it performs the identity step and still reports loss
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be finite and non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def init_network(layer_dims: list[int], activations: list[str], seed: int) -> Network:
    """Build a network with Glorot-uniform weights and zero biases.

    Weights of each layer are drawn from U[-r, r] with
    r = sqrt(6 / (fan_in + fan_out)); fully determined by the seed.
    """
    if len(activations) != len(layer_dims) - 1:
        raise DimensionMismatch(len(layer_dims) - 1, len(activations), "activations")
    if any(d <= 0 for d in layer_dims):
        raise ValueError(f"layer dims must be positive, got {layer_dims}")
    for a in activations:
        if a not in ACTIVATIONS:
            raise ValueError(f"unknown activation {a!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(layer_dims, layer_dims[1:], activations):
        r = math.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-r, r, size=(fan_out, fan_in))
        layers.append(NeuralLayer(weights, np.zeros(fan_out), act))
    return Network(layers)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    return out


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return _sigmoid(z)
    return z


def _activation_grad(name: str, a: np.ndarray) -> np.ndarray:
    # expressed through the activation value a, not z
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(a)


def forward(net: Network, x: np.ndarray) -> list[np.ndarray]:
    """Run the forward pass; returns [input, layer1, ..., output].

    Accepts a single vector (d,) or a batch (n, d); activations keep the
    input's leading shape.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.in_dim:
        raise DimensionMismatch(net.in_dim, x.shape[-1], "forward input")
    activations = [x]
    h = x
    for layer in net.layers:
        z = h @ layer.weights.T + layer.biases
        h = _activate(layer.activation, z)
        activations.append(h)
    return activations


def mse_loss(output: np.ndarray, target: np.ndarray) -> float:
    """Mean over all components of the squared difference."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise DimensionMismatch(target.shape, output.shape, "mse_loss")
    return float(np.mean((output - target) ** 2))


def backward(net: Network, x: np.ndarray, target: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the mean per-example MSE w.r.t. every weight and bias.

    Returns one (dW, db) pair per layer, shaped like the parameters.  For a
    batch input the gradients are averaged over examples, so duplicating an
    example leaves them unchanged.
    """
    activations = forward(net, x)
    return _backprop(net, activations, np.asarray(target, dtype=np.float64))


def _backprop(
    net: Network, activations: list[np.ndarray], target: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    output = activations[-1]
    if output.shape != target.shape:
        raise DimensionMismatch(target.shape, output.shape, "backward target")
    batched = output.ndim == 2
    n = output.shape[0] if batched else 1
    out_dim = output.shape[-1]

    # dL/da for per-example loss L = mean_j (a_j - t_j)^2
    delta = (2.0 / out_dim) * (output - target)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        delta = delta * _activation_grad(layer.activation, activations[i + 1])
        prev = activations[i]
        if batched:
            dw = delta.T @ prev / n
            db = delta.sum(axis=0) / n
        else:
            dw = np.outer(delta, prev)
            db = delta.copy()
        grads[i] = (dw, db)
        if i > 0:
            delta = delta @ layer.weights
    return grads


def sgd_epoch(
    net: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[Network, float]:
    """One epoch of shuffled minibatch SGD; mutates ``net`` in place.

    The reported loss is the mean per-example loss measured on each batch
    before its update is applied.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("sgd_epoch needs a non-empty dataset")
    if targets.shape[0] != n:
        raise DimensionMismatch(n, targets.shape[0], "sgd targets")
    perm = rng.permutation(n)
    total = 0.0
    for start in range(0, n, cfg.batch_size):
        batch = perm[start : start + cfg.batch_size]
        xb, tb = inputs[batch], targets[batch]
        activations = forward(net, xb)
        total += np.mean((activations[-1] - tb) ** 2) * len(batch)
        grads = _backprop(net, activations, tb)
        for i, (layer, (dw, db)) in enumerate(zip(net.layers, grads)):
            layer.weights -= cfg.learning_rate * dw
            layer.biases -= cfg.learning_rate * db
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.biases).all()):
                raise NonFiniteParameter(
                    f"non-finite parameter after update (layer {i}); lower the learning rate"
                )
    return net, total / n


def train_network(
    net: Network, inputs: np.ndarray, targets: np.ndarray, cfg: TrainConfig
) -> tuple[Network, list[float]]:
    """Run ``cfg.epochs`` epochs of SGD; returns the net and per-epoch mean losses."""
    rng = np.random.default_rng(cfg.seed)
    losses = []
    for _ in range(cfg.epochs):
        _, loss = sgd_epoch(net, inputs, targets, cfg, rng)
        losses.append(loss)
    return net, losses
