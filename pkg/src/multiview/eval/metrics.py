"""Classification metrics. Percentages are returned on a 0-100 scale."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import LabelOutOfRange, LengthMismatch


@dataclass
class ConfusionMatrix:
    """Rows are actual classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return 100.0 * np.trace(self.counts) / self.total if self.total else 0.0

    def to_csv(self, class_names: Sequence[str]) -> str:
        lines = ["actual\\predicted," + ",".join(class_names)]
        for name, row in zip(class_names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def _labels(preds, truths, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.int64).reshape(-1)
    t = np.asarray(truths, dtype=np.int64).reshape(-1)
    if len(p) != len(t):
        raise LengthMismatch(f"{len(p)} predictions but {len(t)} truths")
    if k is not None and len(p):
        lo, hi = min(p.min(), t.min()), max(p.max(), t.max())
        if lo < 0 or hi >= k:
            raise LabelOutOfRange(f"labels must lie in [0, {k})")
    return p, t


def confusion_matrix(preds, truths, k: int) -> ConfusionMatrix:
    p, t = _labels(preds, truths, k)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def top_k_ranking(probs: np.ndarray) -> np.ndarray:
    """Class indices per row ordered by probability descending, ties by lower index."""
    probs = np.asarray(probs, dtype=np.float64)
    # stable sort on the negated scores keeps lower indices first among ties
    return np.argsort(-probs, axis=-1, kind="stable")


def acc_at_k(prob_outputs, truths, k_top: int) -> float:
    if k_top < 1:
        raise ValueError(f"k_top must be >= 1, got {k_top}")
    probs = np.atleast_2d(np.asarray(prob_outputs, dtype=np.float64))
    t = np.asarray(truths, dtype=np.int64).reshape(-1)
    if len(t) == 0 and np.asarray(prob_outputs).size == 0:
        return 0.0
    if probs.shape[0] != len(t):
        raise LengthMismatch(f"{probs.shape[0]} probability rows but {len(t)} truths")
    top = top_k_ranking(probs)[:, :k_top]
    return 100.0 * float(np.mean(np.any(top == t[:, None], axis=1)))


def per_class_f1(preds, truths, k: int) -> np.ndarray:
    counts = confusion_matrix(preds, truths, k).counts
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return f1


def macro_f1(preds, truths, k: int) -> float:
    return 100.0 * float(per_class_f1(preds, truths, k).mean())


def micro_f1(preds, truths, k: int) -> float:
    """Pooled F1. Every sample contributes one TP or one (FP, FN) pair, so this is accuracy."""
    counts = confusion_matrix(preds, truths, k).counts
    tp = float(np.trace(counts))
    fp = fn = float(counts.sum()) - tp
    if tp == 0:
        return 0.0
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    if precision == recall:
        # harmonic mean of equal values, without rounding drift
        return 100.0 * precision
    return 100.0 * 2 * precision * recall / (precision + recall)


def summarize_runs(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation (0 for a single run)."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
