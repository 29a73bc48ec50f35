"""Experiment protocols: repeated train/test runs, hyperparameter grid search,
train-ratio sweeps and the bagging comparison.

Seeds for every trained member are derived from the master seed and the
member's slot (kind, run, member), so results are independent of how the
work is scheduled.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..classifier import TrainConfig, predict_batch
from ..ensemble import (
    EnsembleKind,
    EnsembleModel,
    MemberTask,
    ViewInputs,
    bagging_plan,
    member_views,
    predict_inputs,
    train_members,
)
from ..seeds import derive_seed
from ..views import ViewConfig, ViewKind
from .metrics import ConfusionMatrix, acc_at_k, confusion_matrix, macro_f1, micro_f1, summarize_runs
from .splits import SplitSpec, stratified_split

METRICS = ("acc_at_1", "acc_at_3", "macro_f1", "micro_f1")
TABLE_METRICS = ("acc_at_1", "acc_at_3", "macro_f1")
DEFAULT_LRS = (0.001, 0.01, 0.1)
DEFAULT_BATCHES = (32, 64, 128)
SWEEP_TRAIN_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)

_KIND_SLOT = {kind: i for i, kind in enumerate(EnsembleKind)}


@dataclass
class MetricsReport:
    """Per-run metric values (percent) for one table row."""

    label: dict
    runs: dict[str, list[float]] = field(default_factory=lambda: {m: [] for m in METRICS})

    def add(self, values: dict[str, float]) -> None:
        for m in METRICS:
            self.runs[m].append(float(values[m]))

    def mean(self, metric: str) -> float:
        return summarize_runs(self.runs[metric])[0]

    def std(self, metric: str) -> float:
        return summarize_runs(self.runs[metric])[1]

    def to_dict(self) -> dict:
        out = dict(self.label)
        for m in METRICS:
            out[m] = {"mean": self.mean(m), "std": self.std(m), "runs": self.runs[m]}
        return out


def score(probs: np.ndarray, truths, k: int) -> dict[str, float]:
    truths = np.asarray(truths, dtype=np.int64)
    preds = np.argmax(probs, axis=1)
    return {
        "acc_at_1": acc_at_k(probs, truths, 1),
        "acc_at_3": acc_at_k(probs, truths, 3),
        "macro_f1": macro_f1(preds, truths, k),
        "micro_f1": micro_f1(preds, truths, k),
    }


def resolve_config(cfgs, view: ViewKind) -> TrainConfig:
    """``cfgs`` is one TrainConfig for all views or a mapping view -> TrainConfig."""
    if isinstance(cfgs, TrainConfig):
        return cfgs
    return cfgs[ViewKind(view)]


def _kind_tasks(kind, run, master_seed, split: SplitSpec, labels, cfgs, k):
    """Member tasks for one (kind, run) slot, plus bagging out-of-bag sets if any."""
    kind = EnsembleKind(kind)
    train_idx = split.indices("train")
    tasks, oob = [], None
    if kind is EnsembleKind.OOO_BAGGING:
        pools = [sorted(a + b) for a, b in zip(split.train, split.validation)]
        plan = bagging_plan(pools, derive_seed(master_seed, _KIND_SLOT[kind], run, 1000),
                            3, split.indices("test"))
        oob = plan.out_of_bag
        for m, idx in enumerate(plan.train):
            cfg = resolve_config(cfgs, ViewKind.ORIGINAL)
            seed = derive_seed(master_seed, _KIND_SLOT[kind], run, m)
            tasks.append(MemberTask(ViewKind.ORIGINAL, cfg.with_seed(seed), idx, labels[idx], k))
        return tasks, oob
    for m, view in enumerate(member_views(kind)):
        cfg = resolve_config(cfgs, view)
        seed = derive_seed(master_seed, _KIND_SLOT[kind], run, m)
        tasks.append(MemberTask(view, cfg.with_seed(seed), train_idx, labels[train_idx], k))
    return tasks, oob


@dataclass
class ExperimentResult:
    reports: list[MetricsReport]
    confusions: dict[str, list[ConfusionMatrix]]
    models: dict[str, list[EnsembleModel]]


def run_experiment(dataset, kinds: Sequence[EnsembleKind], runs: int, split: SplitSpec, cfgs,
                   vcfg: ViewConfig | None = None, master_seed: int = 0, jobs: int = 1,
                   inputs: ViewInputs | None = None, extra_label: dict | None = None) -> ExperimentResult:
    """Train and test each kind ``runs`` times on a fixed split; only training seeds vary."""
    vcfg = vcfg or ViewConfig()
    inputs = inputs or ViewInputs(dataset, vcfg)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    k = dataset.class_count
    kinds = [EnsembleKind(kd) for kd in kinds]

    slots, all_tasks = [], []
    for kind in kinds:
        for run in range(runs):
            tasks, oob = _kind_tasks(kind, run, master_seed, split, labels, cfgs, k)
            slots.append((kind, run, len(tasks), oob))
            all_tasks.extend(tasks)
    trained = train_members(all_tasks, inputs, jobs)

    test_idx = split.indices("test")
    truths = labels[test_idx]
    reports = {kind: MetricsReport({**(extra_label or {}), "kind": kind.value}) for kind in kinds}
    confusions = {kind.value: [] for kind in kinds}
    models = {kind.value: [] for kind in kinds}
    pos = 0
    for kind, run, m, oob in slots:
        members = list(zip([t.view for t in all_tasks[pos:pos + m]], trained[pos:pos + m]))
        pos += m
        model = EnsembleModel(kind, members, k, inputs.cfg,
                              out_of_bag=[o.tolist() for o in oob] if oob is not None else None)
        probs = predict_inputs(model, inputs, test_idx)
        reports[kind].add(score(probs, truths, k))
        confusions[kind.value].append(confusion_matrix(np.argmax(probs, axis=1), truths, k))
        models[kind.value].append(model)
    return ExperimentResult([reports[kd] for kd in kinds], confusions, models)


@dataclass
class GridResult:
    best: TrainConfig
    cells: list[dict]

    @property
    def training_runs(self) -> int:
        return sum(len(c["val_acc_at_1"]) for c in self.cells)


def grid_search(dataset, view: ViewKind, split: SplitSpec, lrs=DEFAULT_LRS, batches=DEFAULT_BATCHES,
                epochs: int = 500, runs: int = 2, vcfg: ViewConfig | None = None, master_seed: int = 0,
                jobs: int = 1, inputs: ViewInputs | None = None) -> GridResult:
    """Pick the (lr, batch) pair with the best mean validation Acc@1 over ``runs`` runs.

    Ties go to the lower learning rate, then the lower batch size.
    """
    vcfg = vcfg or ViewConfig()
    inputs = inputs or ViewInputs(dataset, vcfg)
    view = ViewKind(view)
    labels = np.asarray(dataset.labels, dtype=np.int64)
    k = dataset.class_count
    train_idx, val_idx = split.indices("train"), split.indices("validation")
    grid = [(lr, b) for lr in lrs for b in batches]
    tasks = []
    for ci, (lr, b) in enumerate(grid):
        for run in range(runs):
            seed = derive_seed(master_seed, 7000 + list(ViewKind).index(view), ci, run)
            cfg = TrainConfig(learning_rate=lr, batch_size=b, epochs=epochs, seed=seed)
            tasks.append(MemberTask(view, cfg, train_idx, labels[train_idx], k))
    trained = train_members(tasks, inputs, jobs)
    x_val = inputs.get(view, val_idx)
    cells = []
    for ci, (lr, b) in enumerate(grid):
        accs = []
        for clf in trained[ci * runs:(ci + 1) * runs]:
            accs.append(acc_at_k(predict_batch(clf, x_val), labels[val_idx], 1))
        cells.append({"learning_rate": lr, "batch_size": b, "val_acc_at_1": accs,
                      "mean_val_acc_at_1": float(np.mean(accs))})
    best = min(cells, key=lambda c: (-c["mean_val_acc_at_1"], c["learning_rate"], c["batch_size"]))
    best_cfg = TrainConfig(learning_rate=best["learning_rate"], batch_size=best["batch_size"],
                           epochs=epochs, seed=master_seed)
    return GridResult(best_cfg, cells)


def ratio_sweep(dataset, kinds, cfgs, train_ratios=SWEEP_TRAIN_RATIOS, val_ratio: float = 0.1,
                runs: int = 10, vcfg: ViewConfig | None = None, master_seed: int = 0, jobs: int = 1,
                inputs: ViewInputs | None = None) -> list[MetricsReport]:
    """One experiment per train ratio; test takes ``1 - train - val`` of each class."""
    vcfg = vcfg or ViewConfig()
    inputs = inputs or ViewInputs(dataset, vcfg)
    rows = []
    for i, ratio in enumerate(train_ratios):
        split = stratified_split(dataset, seed=derive_seed(master_seed, 8000, i),
                                 ratios=(ratio, val_ratio))
        result = run_experiment(dataset, kinds, runs, split, cfgs, vcfg, derive_seed(master_seed, 8100, i),
                                jobs, inputs, extra_label={"train_ratio": ratio})
        rows.extend(result.reports)
    return rows


# ---------------------------------------------------------------------------
# report formatting


def fmt(x: float) -> str:
    return f"{x:.2f}"


def report_csv(reports: Sequence[MetricsReport], metrics=TABLE_METRICS, extra: dict | None = None) -> str:
    """One row per report: its label columns, then ``<metric>_mean`` / ``<metric>_std`` pairs."""
    if not reports:
        return ""
    label_cols = list(reports[0].label)
    extra = extra or {}
    extra_cols = list(next(iter(extra.values()))) if extra else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = label_cols + [f"{m}_{s}" for m in metrics for s in ("mean", "std")] + extra_cols
    writer.writerow(header)
    for r in reports:
        row = [r.label[c] for c in label_cols]
        for m in metrics:
            row += [fmt(r.mean(m)), fmt(r.std(m))]
        key = r.label.get("kind")
        row += [extra.get(key, {}).get(c, "") for c in extra_cols]
        writer.writerow(row)
    return buf.getvalue()
