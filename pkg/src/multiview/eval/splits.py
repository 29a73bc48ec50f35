"""Stratified train/validation/test splits and k-fold partitions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientSamples

# guards floor() against ratios like 0.3 * 150 = 44.999999999999993
_FLOOR_SLACK = 1e-9


@dataclass
class SplitSpec:
    """Per-class lists of dataset indices for each partition."""

    train: list[list[int]]
    validation: list[list[int]]
    test: list[list[int]]
    seed: int

    def indices(self, part: str) -> np.ndarray:
        groups = {"train": self.train, "validation": self.validation, "test": self.test}[part]
        flat = [i for group in groups for i in group]
        return np.array(sorted(flat), dtype=np.int64)

    def counts(self) -> list[tuple[int, int, int]]:
        return [(len(a), len(b), len(c)) for a, b, c in zip(self.train, self.validation, self.test)]

    def __eq__(self, other):
        if not isinstance(other, SplitSpec):
            return NotImplemented
        norm = lambda g: [list(map(int, x)) for x in g]  # noqa: E731
        return (
            int(self.seed) == int(other.seed)
            and norm(self.train) == norm(other.train)
            and norm(self.validation) == norm(other.validation)
            and norm(self.test) == norm(other.test)
        )


def _labels_of(data) -> np.ndarray:
    return np.asarray(getattr(data, "labels", data), dtype=np.int64)


def ratio_counts(n: int, train_ratio: float, val_ratio: float) -> tuple[int, int, int]:
    """``train = floor(r_train * n)``, ``val = floor(r_val * n)``, test takes the rest."""
    if train_ratio < 0 or val_ratio < 0 or train_ratio + val_ratio > 1 + _FLOOR_SLACK:
        raise ValueError(f"invalid ratios ({train_ratio}, {val_ratio})")
    n_train = math.floor(train_ratio * n + _FLOOR_SLACK)
    n_val = math.floor(val_ratio * n + _FLOOR_SLACK)
    return n_train, n_val, n - n_train - n_val


def stratified_split(data, seed: int, counts=None, ratios=None) -> SplitSpec:
    """Shuffle each class with a seeded RNG and assign contiguous train/val/test blocks.

    Give either absolute per-class ``counts=(train, val, test)`` or
    ``ratios=(train, val[, test])``; with ratios the test block receives
    whatever remains after flooring.
    """
    if (counts is None) == (ratios is None):
        raise ValueError("pass exactly one of counts or ratios")
    labels = _labels_of(data)
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c in range(int(labels.max()) + 1 if len(labels) else 0):
        members = np.flatnonzero(labels == c)
        n = len(members)
        if counts is not None:
            n_train, n_val, n_test = (int(v) for v in counts)
        else:
            n_train, n_val, n_test = ratio_counts(n, ratios[0], ratios[1])
        if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test > n:
            raise InsufficientSamples(
                f"class {c} has {n} samples but the split asks for {n_train}+{n_val}+{n_test}"
            )
        order = members[rng.permutation(n)]
        train.append(sorted(order[:n_train].tolist()))
        val.append(sorted(order[n_train:n_train + n_val].tolist()))
        test.append(sorted(order[n_train + n_val:n_train + n_val + n_test].tolist()))
    return SplitSpec(train, val, test, int(seed))


def fold_assignment(labels, folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; each class is shuffled and dealt out in near-equal blocks."""
    labels = _labels_of(labels)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if len(members) < folds:
            raise InsufficientSamples(f"class {c} has {len(members)} samples, fewer than {folds} folds")
        order = members[rng.permutation(len(members))]
        for f, block in enumerate(np.array_split(order, folds)):
            assignment[block] = f
    return assignment


def kfold_split(data, folds: int = 5, seed: int = 0) -> list[SplitSpec]:
    """Split ``i`` validates on fold ``i`` and trains on the others; test is empty."""
    labels = _labels_of(data)
    assignment = fold_assignment(labels, folds, seed)
    classes = range(int(labels.max()) + 1)
    splits = []
    for f in range(folds):
        train = [np.flatnonzero((labels == c) & (assignment != f)).tolist() for c in classes]
        val = [np.flatnonzero((labels == c) & (assignment == f)).tolist() for c in classes]
        splits.append(SplitSpec(train, val, [[] for _ in classes], int(seed)))
    return splits
