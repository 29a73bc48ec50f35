"""Base classifier contract and the reference softmax-regression model.

A base classifier maps one prepared view (``(side, side, 3)`` floats in
[0, 1]) to a probability vector over ``k`` classes. The reference model is
multinomial logistic regression on the flattened pixels plus a bias
feature, trained by seeded minibatch SGD from zero weights.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyTrainingSet, LabelOutOfRange, NonFiniteLogit, ShapeMismatch

CE_EPS = 1e-12
MAGIC = "multiview.TrainedClassifier"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 32
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, int(seed))

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }


@dataclass
class TrainedClassifier:
    weights: np.ndarray  # (k, 3 * side**2 + 1), last column is the bias
    input_side: int
    class_count: int
    initial_loss: float | None = field(default=None, compare=False)
    final_loss: float | None = field(default=None, compare=False)

    @property
    def n_features(self) -> int:
        return 3 * self.input_side * self.input_side

    def __eq__(self, other):
        if not isinstance(other, TrainedClassifier):
            return NotImplemented
        return (
            self.input_side == other.input_side
            and self.class_count == other.class_count
            and np.array_equal(self.weights, other.weights)
        )

    def to_dict(self) -> dict:
        return {
            "magic": MAGIC,
            "version": FORMAT_VERSION,
            "class_count": self.class_count,
            "input_side": self.input_side,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedClassifier":
        if data.get("magic") != MAGIC or data.get("version") != FORMAT_VERSION:
            raise ValueError("not a serialized TrainedClassifier (bad magic or version)")
        weights = np.asarray(data["weights"], dtype=np.float64)
        k, side = int(data["class_count"]), int(data["input_side"])
        if weights.shape != (k, 3 * side * side + 1):
            raise ShapeMismatch(f"weights shape {weights.shape} inconsistent with k={k}, side={side}")
        return cls(weights, side, k)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TrainedClassifier":
        return cls.from_dict(json.loads(Path(path).read_text()))


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NonFiniteLogit("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(pred, truth: int) -> float:
    p = float(np.asarray(pred)[truth])
    return -float(np.log(max(p, CE_EPS)))


def _design(x: np.ndarray) -> np.ndarray:
    """Flatten ``(n, side, side, 3)`` inputs and append the constant bias feature."""
    flat = x.reshape(x.shape[0], -1)
    return np.hstack([flat, np.ones((flat.shape[0], 1))])


def mean_loss(weights: np.ndarray, design: np.ndarray, labels: np.ndarray) -> float:
    probs = softmax(design @ weights.T)
    picked = np.maximum(probs[np.arange(len(labels)), labels], CE_EPS)
    return float(-np.log(picked).mean())


def loss_gradient(weights: np.ndarray, design: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the weight matrix."""
    probs = softmax(design @ weights.T)
    probs[np.arange(len(labels)), labels] -= 1.0
    return probs.T @ design / len(labels)


def _check_training_data(x: np.ndarray, y: np.ndarray, k: int) -> None:
    if len(y) == 0:
        raise EmptyTrainingSet("training set is empty")
    if x.ndim != 4 or x.shape[1] != x.shape[2] or x.shape[3] != 3:
        raise ShapeMismatch(f"expected (n, side, side, 3) inputs, got {x.shape}")
    if len(x) != len(y):
        raise ShapeMismatch(f"{len(x)} inputs but {len(y)} labels")
    if y.min() < 0 or y.max() >= k:
        raise LabelOutOfRange(f"labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")


def train_arrays(x, y, cfg: TrainConfig, k: int) -> TrainedClassifier:
    """Fit on stacked inputs ``x`` of shape ``(n, side, side, 3)`` and labels ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_training_data(x, y, k)
    design = _design(x)
    n = len(y)
    weights = np.zeros((k, design.shape[1]))
    rng = np.random.default_rng(cfg.seed)
    initial = mean_loss(weights, design, y)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            weights -= cfg.learning_rate * loss_gradient(weights, design[idx], y[idx])
    final = mean_loss(weights, design, y) if cfg.epochs else initial
    return TrainedClassifier(weights, x.shape[1], k, initial_loss=initial, final_loss=final)


def train(samples: Sequence[tuple[np.ndarray, int]], cfg: TrainConfig, k: int) -> TrainedClassifier:
    """Fit on a list of ``(model_input, label)`` pairs."""
    if not samples:
        raise EmptyTrainingSet("training set is empty")
    x = np.stack([np.asarray(s[0], dtype=np.float64) for s in samples])
    y = np.array([int(s[1]) for s in samples], dtype=np.int64)
    return train_arrays(x, y, cfg, k)


def predict_batch(model: TrainedClassifier, x) -> np.ndarray:
    """Probability rows for stacked inputs of shape ``(n, side, side, 3)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != (model.input_side, model.input_side, 3):
        raise ShapeMismatch(
            f"model expects ({model.input_side}, {model.input_side}, 3) inputs, got {x.shape[1:]}"
        )
    return softmax(_design(x) @ model.weights.T)


def predict(model: TrainedClassifier, model_input) -> np.ndarray:
    return predict_batch(model, np.asarray(model_input)[None])[0]
