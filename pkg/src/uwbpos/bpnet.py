"""From-scratch backpropagation classifier over fingerprint grid cells.

A plain feedforward network (sigmoid hidden layers, softmax output) trained
with mini-batch gradient descent on cross-entropy. Input is the normalized
measured-distance triple; output classes are grid cells, so a classification
is a position estimate at the winning cell's centroid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DivergedLoss, EmptyDatabase, ShapeMismatch
from .fingerprint import DistanceDatabase, Grid, make_grid
from .geometry import Point2D, Zone
from .ranging import NoiseSpec


@dataclass
class MLP:
    """Layered weights/biases. weights[l] maps layer l to l+1, row-major (in, out)."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def validate(self) -> None:
        if len(self.layer_sizes) < 3:
            raise ShapeMismatch("the network needs at least input, one hidden, and output layers")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeMismatch("one weight matrix and bias vector per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if w.shape != expect:
                raise ShapeMismatch(f"weight {l} has shape {w.shape}, expected {expect}")
            if b.shape != (self.layer_sizes[l + 1],):
                raise ShapeMismatch(f"bias {l} has shape {b.shape}, expected ({expect[1]},)")


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature min/max (mm) observed over the training set."""

    mins: tuple[float, float, float]
    maxs: tuple[float, float, float]

    def __post_init__(self):
        if any(hi < lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("normalization max must be >= min for every feature")


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple[int, ...] = (64,)
    learning_rate: float = 0.05
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    init_range: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("at least one hidden layer with >= 1 units is required")
        if self.init_range <= 0:
            raise ValueError("init_range must be > 0")


@dataclass(frozen=True)
class Augmentation:
    """Seeded Gaussian-noised replicas of each database entry added to training."""

    noise: NoiseSpec
    replicas: int

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")


@dataclass
class TrainedModel:
    """Everything needed to classify a raw measurement into a grid cell."""

    mlp: MLP
    norm: NormalizationParams
    grid: Grid
    seed: int


@dataclass
class TrainResult:
    trained: TrainedModel
    loss_history: list[float] = field(default_factory=list)
    train_accuracy: float = 0.0


def normalize(x: Sequence[float], params: NormalizationParams) -> tuple[float, float, float]:
    """Min-max scale a measured triple into [0,1]; constant features map to 0.

    Out-of-range inputs extrapolate linearly and may leave [0,1].
    """
    return tuple(_normalize_batch(np.asarray(x, dtype=float).reshape(1, 3), params)[0])


def denormalize(x: Sequence[float], params: NormalizationParams) -> tuple[float, float, float]:
    mins = np.asarray(params.mins)
    spans = np.asarray(params.maxs) - mins
    return tuple(np.asarray(x, dtype=float) * spans + mins)


def _normalize_batch(x: np.ndarray, params: NormalizationParams) -> np.ndarray:
    mins = np.asarray(params.mins)
    spans = np.asarray(params.maxs) - mins
    out = np.zeros_like(x, dtype=float)
    nonzero = spans != 0
    out[:, nonzero] = (x[:, nonzero] - mins[nonzero]) / spans[nonzero]
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_batch(mlp: MLP, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Probabilities plus post-activation caches (activations[0] is the input)."""
    activations = [x]
    a = x
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        a = _sigmoid(a @ w + b)
        activations.append(a)
    logits = a @ mlp.weights[-1] + mlp.biases[-1]
    probs = _softmax(logits)
    return probs, activations


def forward(mlp: MLP, x: Sequence[float]) -> np.ndarray:
    """Class-probability vector for one normalized input triple."""
    mlp.validate()
    arr = np.asarray(x, dtype=float)
    if arr.shape != (mlp.layer_sizes[0],):
        raise ShapeMismatch(f"input has shape {arr.shape}, expected ({mlp.layer_sizes[0]},)")
    probs, _ = _forward_batch(mlp, arr.reshape(1, -1))
    return probs[0]


def _loss_batch(mlp: MLP, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy via logsumexp (numerically stable)."""
    a = x
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        a = _sigmoid(a @ w + b)
    logits = a @ mlp.weights[-1] + mlp.biases[-1]
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(len(y)), y]))


def _loss_and_grads(
    mlp: MLP, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    n = x.shape[0]
    probs, activations = _forward_batch(mlp, x)
    loss = _loss_batch(mlp, x, y)

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w = [np.empty(0)] * len(mlp.weights)
    grad_b = [np.empty(0)] * len(mlp.biases)
    for l in range(len(mlp.weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            a = activations[l]
            delta = (delta @ mlp.weights[l].T) * a * (1.0 - a)
    return loss, grad_w, grad_b


def _init_mlp(layer_sizes: tuple[int, ...], init_range: float, rng: np.random.Generator) -> MLP:
    weights = [
        rng.uniform(-init_range, init_range, size=(layer_sizes[l], layer_sizes[l + 1]))
        for l in range(len(layer_sizes) - 1)
    ]
    biases = [np.zeros(layer_sizes[l + 1]) for l in range(len(layer_sizes) - 1)]
    return MLP(tuple(layer_sizes), weights, biases)


def build_training_set(
    database: DistanceDatabase, augmentation: Augmentation | None
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble (X, labels): clean entries first, then replica rounds in order."""
    if len(database.entries) == 0:
        raise EmptyDatabase("cannot train on an empty database")
    clean = np.asarray(database.entries, dtype=float)
    labels = np.arange(len(database.entries))
    if augmentation is None:
        return clean, labels
    rng = np.random.default_rng(augmentation.noise.seed)
    blocks = [clean]
    for _ in range(augmentation.replicas):
        noisy = clean + rng.normal(0.0, augmentation.noise.sigma, size=clean.shape)
        blocks.append(np.maximum(noisy, 0.0))
    x = np.concatenate(blocks, axis=0)
    y = np.tile(labels, augmentation.replicas + 1)
    return x, y


def train(
    database: DistanceDatabase,
    config: TrainConfig,
    augmentation: Augmentation | None = None,
) -> TrainResult:
    """Mini-batch gradient descent on cross-entropy over (triple -> cell) pairs.

    Normalization parameters come from the assembled training set only.
    Deterministic given config.seed (and the augmentation seed when used);
    returns the final-epoch model.
    """
    x_raw, y = build_training_set(database, augmentation)
    norm = NormalizationParams(
        mins=tuple(x_raw.min(axis=0)),
        maxs=tuple(x_raw.max(axis=0)),
    )
    x = _normalize_batch(x_raw, norm)

    layer_sizes = (x.shape[1], *config.hidden_sizes, database.grid.n_cells)
    rng = np.random.default_rng(config.seed)
    mlp = _init_mlp(layer_sizes, config.init_range, rng)

    n = x.shape[0]
    history = []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, grad_w, grad_b = _loss_and_grads(mlp, x[idx], y[idx])
            if not math.isfinite(loss):
                raise DivergedLoss(epoch)
            for l in range(len(mlp.weights)):
                mlp.weights[l] -= config.learning_rate * grad_w[l]
                mlp.biases[l] -= config.learning_rate * grad_b[l]
            total += loss * len(idx)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DivergedLoss(epoch)
        history.append(epoch_loss)

    trained = TrainedModel(mlp, norm, database.grid, config.seed)
    clean = np.asarray(database.entries, dtype=float)
    probs, _ = _forward_batch(mlp, _normalize_batch(clean, norm))
    accuracy = float(np.mean(np.argmax(probs, axis=1) == np.arange(len(clean))))
    return TrainResult(trained, history, accuracy)


def classify(trained: TrainedModel, measured: Sequence[float]) -> tuple[int, Point2D]:
    """Cell id (argmax, ties to the lowest id) and its centroid for a raw triple."""
    probs = forward(trained.mlp, normalize(measured, trained.norm))
    if len(probs) != trained.grid.n_cells:
        raise ShapeMismatch(
            f"model outputs {len(probs)} classes for a grid of {trained.grid.n_cells} cells"
        )
    cell_id = int(np.argmax(probs))
    return cell_id, trained.grid.centroid(cell_id)


def gradient_check(mlp: MLP, x: Sequence[float], label: int, step: float = 1e-5) -> float:
    """Max error of analytic gradients vs central finite differences.

    Per parameter the error is relative where either gradient is
    non-negligible and falls back to the absolute difference otherwise.
    """
    mlp.validate()
    xb = np.asarray(x, dtype=float).reshape(1, -1)
    yb = np.asarray([label])
    _, grad_w, grad_b = _loss_and_grads(mlp, xb, yb)

    worst = 0.0
    for tensor, grad in list(zip(mlp.weights, grad_w)) + list(zip(mlp.biases, grad_b)):
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lo_hi = _loss_batch(mlp, xb, yb)
            flat[i] = orig - step
            lo_lo = _loss_batch(mlp, xb, yb)
            flat[i] = orig
            numeric = (lo_hi - lo_lo) / (2.0 * step)
            denom = max(abs(gflat[i]), abs(numeric))
            err = abs(gflat[i] - numeric) if denom < 1e-8 else abs(gflat[i] - numeric) / denom
            worst = max(worst, err)
    return worst


def save_model(trained: TrainedModel, path: str | Path) -> None:
    """Write the self-describing model file (JSON)."""
    grid = trained.grid
    payload = {
        "layer_sizes": list(trained.mlp.layer_sizes),
        "weights": [w.tolist() for w in trained.mlp.weights],
        "biases": [b.tolist() for b in trained.mlp.biases],
        "normalization": {"min_mm": list(trained.norm.mins), "max_mm": list(trained.norm.maxs)},
        "grid": {
            "origin_x_mm": grid.zone.origin.x,
            "origin_y_mm": grid.zone.origin.y,
            "width_mm": grid.zone.width,
            "height_mm": grid.zone.height,
            "cell_size_mm": grid.cell_size,
        },
        "seed": trained.seed,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    mlp = MLP(
        tuple(data["layer_sizes"]),
        [np.asarray(w, dtype=float) for w in data["weights"]],
        [np.asarray(b, dtype=float) for b in data["biases"]],
    )
    mlp.validate()
    g = data["grid"]
    grid = make_grid(
        Zone(Point2D(g["origin_x_mm"], g["origin_y_mm"]), g["width_mm"], g["height_mm"]),
        g["cell_size_mm"],
    )
    norm = NormalizationParams(tuple(data["normalization"]["min_mm"]), tuple(data["normalization"]["max_mm"]))
    return TrainedModel(mlp, norm, grid, data["seed"])
