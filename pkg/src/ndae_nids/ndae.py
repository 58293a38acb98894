"""Non-symmetric deep auto-encoders, two-stage stacking, and a softmax baseline.

A non-symmetric auto-encoder keeps a multi-layer sigmoid encoder but replaces
the mirrored decoder with a single linear reconstruction layer, so the
parameter count stays well below that of a symmetric auto-encoder of the same
depth.  Training is plain reconstruction: minimize the MSE between the input
and the linear reconstruction of the deepest code.  Feature extraction never
touches labels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .neural import (
    DimensionMismatch,
    Network,
    NeuralLayer,
    TrainConfig,
    forward,
    init_network,
    mse_loss,
    train_network,
)

FEATURE_MODES = ("deepest", "concat")


@dataclass
class NdaeModel:
    encoder: Network            # k sigmoid layers
    reconstructor: NeuralLayer  # single linear layer back to input_dim
    input_dim: int
    hidden_dims: list[int]


@dataclass
class StackedModel:
    first: NdaeModel
    second: NdaeModel
    feature_mode: str = "deepest"

    @property
    def feature_dim(self) -> int:
        if self.feature_mode == "concat":
            return self.first.hidden_dims[-1] + self.second.hidden_dims[-1]
        return self.second.hidden_dims[-1]


@dataclass
class SoftmaxHead:
    layer: NeuralLayer  # linear, n_classes outputs


def train_ndae(
    data: np.ndarray, hidden_dims: list[int], cfg: TrainConfig
) -> tuple[NdaeModel, list[float]]:
    """Train encoder + linear reconstructor jointly on reconstruction MSE.

    Returns the model and the per-epoch mean loss curve; deterministic for a
    fixed seed.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("training data must be a non-empty (n, d) matrix")
    if not hidden_dims:
        raise ValueError("hidden_dims must be non-empty")
    d = data.shape[1]
    dims = [d, *hidden_dims, d]
    activations = ["sigmoid"] * len(hidden_dims) + ["linear"]
    full = init_network(dims, activations, cfg.seed)
    full, losses = train_network(full, data, data, cfg)
    model = NdaeModel(
        encoder=Network(full.layers[:-1]),
        reconstructor=full.layers[-1],
        input_dim=d,
        hidden_dims=list(hidden_dims),
    )
    return model, losses


def encode(model: NdaeModel, x: np.ndarray) -> np.ndarray:
    """Deepest hidden activations; the reconstruction layer is not applied."""
    return forward(model.encoder, x)[-1]


def reconstruct(model: NdaeModel, x: np.ndarray) -> np.ndarray:
    """Apply the full auto-encoder path (encoder + linear reconstructor)."""
    code = encode(model, x)
    return code @ model.reconstructor.weights.T + model.reconstructor.biases


def reconstruction_mse(model: NdaeModel, data: np.ndarray) -> float:
    return mse_loss(reconstruct(model, data), np.asarray(data, dtype=np.float64))


def train_stacked(
    data: np.ndarray,
    dims1: list[int],
    dims2: list[int],
    cfg: TrainConfig,
    feature_mode: str = "deepest",
) -> tuple[StackedModel, tuple[list[float], list[float]]]:
    """Train two NDAEs in series, entirely unsupervised.

    The first trains on the raw features; its encodings of the full training
    set become the second's training input.  The second stage reuses the
    config with seed + 1 so the stages draw independent streams.
    """
    if feature_mode not in FEATURE_MODES:
        raise ValueError(f"feature_mode must be one of {FEATURE_MODES}, got {feature_mode!r}")
    first, curve1 = train_ndae(data, dims1, cfg)
    encoded = encode(first, np.asarray(data, dtype=np.float64))
    second, curve2 = train_ndae(encoded, dims2, replace(cfg, seed=cfg.seed + 1))
    return StackedModel(first, second, feature_mode), (curve1, curve2)


def extract(model: StackedModel, x: np.ndarray) -> np.ndarray:
    """Classifier features: encode through both NDAEs, deepest or concatenated."""
    e1 = encode(model.first, x)
    e2 = encode(model.second, e1)
    if model.feature_mode == "concat":
        return np.concatenate([e1, e2], axis=-1)
    return e2


def ndae_parameter_count(model: NdaeModel) -> int:
    return model.encoder.parameter_count() + (
        model.reconstructor.weights.size + model.reconstructor.biases.size
    )


def mirrored_parameter_count(input_dim: int, hidden_dims: list[int]) -> int:
    """Parameter count of the symmetric auto-encoder with the same hidden dims.

    Comparison baseline for the structural non-symmetry check: the mirrored
    decoder retraces every hidden layer, the non-symmetric one does not.
    """
    dims = [input_dim, *hidden_dims]
    down = sum(a * b + b for a, b in zip(dims, dims[1:]))
    up = sum(a * b + b for a, b in zip(reversed(dims), list(reversed(dims))[1:]))
    return down + up


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_probabilities(head: SoftmaxHead, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != head.layer.in_dim:
        raise DimensionMismatch(head.layer.in_dim, x.shape[-1], "softmax input")
    return _softmax(x @ head.layer.weights.T + head.layer.biases)


def softmax_predict(head: SoftmaxHead, x: np.ndarray) -> np.ndarray:
    """Class indices; argmax takes the lowest index on exact ties."""
    probs = softmax_probabilities(head, x)
    return np.argmax(probs, axis=-1)


def train_softmax_baseline(
    features: np.ndarray, labels: np.ndarray, cfg: TrainConfig, n_classes: int = 5
) -> tuple[SoftmaxHead, list[float]]:
    """Train a linear softmax head with cross-entropy SGD.

    Weights start at zero, so an untrained head predicts the uniform
    distribution.  Returns the head and the per-epoch mean loss curve.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, d = features.shape
    if labels.shape[0] != n:
        raise DimensionMismatch(n, labels.shape[0], "softmax labels")
    head = SoftmaxHead(NeuralLayer(np.zeros((n_classes, d)), np.zeros(n_classes), "linear"))
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    rng = np.random.default_rng(cfg.seed)
    losses = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            xb, yb = features[batch], onehot[batch]
            probs = _softmax(xb @ head.layer.weights.T + head.layer.biases)
            # pre-update batch loss, clipped away from log(0)
            total += -np.sum(yb * np.log(np.maximum(probs, 1e-300)))
            delta = (probs - yb) / len(batch)
            head.layer.weights -= cfg.learning_rate * (delta.T @ xb)
            head.layer.biases -= cfg.learning_rate * delta.sum(axis=0)
        losses.append(total / n)
    return head, losses
