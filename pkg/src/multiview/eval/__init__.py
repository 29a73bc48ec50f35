"""Metrics, data splits and experiment protocols."""

from .metrics import (
    ConfusionMatrix,
    acc_at_k,
    confusion_matrix,
    macro_f1,
    micro_f1,
    summarize_runs,
)
from .splits import SplitSpec, kfold_split, ratio_counts, stratified_split

__all__ = [
    "ConfusionMatrix",
    "SplitSpec",
    "acc_at_k",
    "confusion_matrix",
    "kfold_split",
    "macro_f1",
    "micro_f1",
    "ratio_counts",
    "stratified_split",
    "summarize_runs",
]
