"""Label-consistency analytics: pairwise consistency rates, cross-label-set
training/evaluation and per-class agreement matrices."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensemble import (
    EnsembleKind,
    EnsembleModel,
    MemberTask,
    ViewInputs,
    member_views,
    predict_inputs,
    train_members,
)
from .errors import FewerThanTwoSystems, ImageListMismatch, MultiviewError
from .eval.metrics import acc_at_k
from .eval.protocols import fmt, resolve_config
from .eval.splits import fold_assignment
from .seeds import derive_seed
from .views import ViewConfig


@dataclass
class LabelSet:
    source_name: str
    assignments: dict[str, int]

    @property
    def image_ids(self) -> list[str]:
        return sorted(self.assignments)

    def aligned(self, image_ids: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.assignments[i] for i in image_ids], dtype=np.int64)
        except KeyError as exc:
            raise ImageListMismatch(f"{self.source_name} has no label for image {exc.args[0]}") from None


def _shared_ids(sets: Sequence[LabelSet]) -> list[str]:
    ids = sets[0].image_ids
    for s in sets[1:]:
        if s.image_ids != ids:
            raise ImageListMismatch(f"label sets {sets[0].source_name} and {s.source_name} cover different images")
    return ids


def read_label_csv(path) -> tuple[list[str], list[LabelSet]]:
    """Parse ``image_id,label,source`` rows.

    Returns the alphabetically ordered class names and one LabelSet per
    source in order of first appearance.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"image_id", "label", "source"} - set(reader.fieldnames or ())
        if missing:
            raise MultiviewError(f"{path} lacks columns {sorted(missing)}")
        rows = [(r["image_id"], r["label"], r["source"]) for r in reader]
    classes = sorted({label for _, label, _ in rows})
    index = {c: i for i, c in enumerate(classes)}
    sets: dict[str, dict[str, int]] = {}
    for image_id, label, source in rows:
        bucket = sets.setdefault(source, {})
        if image_id in bucket:
            raise MultiviewError(f"{source} labels image {image_id} twice")
        bucket[image_id] = index[label]
    return classes, [LabelSet(name, a) for name, a in sets.items()]


def consistency_rate(a: LabelSet, b: LabelSet) -> float:
    """Fraction of images that receive the same label in both sets."""
    ids = _shared_ids([a, b])
    if not ids:
        raise ImageListMismatch("label sets are empty")
    agree = int(np.sum(a.aligned(ids) == b.aligned(ids)))
    return agree / len(ids)


@dataclass
class ConsistencyMatrix:
    sources: list[str]
    rates: np.ndarray

    def to_csv(self) -> str:
        return _matrix_csv("", self.sources, self.sources, self.rates)


def consistency_matrix(sets: Sequence[LabelSet]) -> ConsistencyMatrix:
    if len(sets) < 2:
        raise FewerThanTwoSystems("a consistency matrix needs at least two label sets")
    _shared_ids(sets)
    n = len(sets)
    rates = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rates[i, j] = rates[j, i] = consistency_rate(sets[i], sets[j])
    return ConsistencyMatrix([s.source_name for s in sets], rates)


@dataclass
class AgreementMatrix:
    """``values[i, j]``: chance another system assigns j given one system assigned i."""

    values: np.ndarray
    classes: list[str] = field(default_factory=list)
    empty_rows: list[int] = field(default_factory=list)

    def to_csv(self) -> str:
        names = self.classes or [str(i) for i in range(len(self.values))]
        return _matrix_csv("given\\assigned", names, names, self.values)


def agreement_matrix(prediction_sets, k: int, classes: Sequence[str] | None = None) -> AgreementMatrix:
    """Pool label co-occurrences over every ordered pair of distinct systems and row-normalise.

    ``prediction_sets`` holds LabelSets or equal-length label arrays. Rows for
    labels that never occur are set to the uniform distribution and listed in
    ``empty_rows``.
    """
    if len(prediction_sets) < 2:
        raise FewerThanTwoSystems("agreement needs at least two systems")
    if all(isinstance(p, LabelSet) for p in prediction_sets):
        ids = _shared_ids(prediction_sets)
        systems = [p.aligned(ids) for p in prediction_sets]
    else:
        systems = [np.asarray(p, dtype=np.int64) for p in prediction_sets]
        if len({len(s) for s in systems}) != 1:
            raise ImageListMismatch("systems label different numbers of images")
    counts = np.zeros((k, k), dtype=np.int64)
    for a, sa in enumerate(systems):
        for b, sb in enumerate(systems):
            if a != b:
                np.add.at(counts, (sa, sb), 1)
    mass = counts.sum(axis=1)
    values = np.full((k, k), 1.0 / k)
    nonzero = mass > 0
    values[nonzero] = counts[nonzero] / mass[nonzero, None]
    return AgreementMatrix(values, list(classes or []), np.flatnonzero(~nonzero).tolist())


def _matrix_csv(corner: str, rows: Sequence[str], cols: Sequence[str], values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([corner, *cols])
    for name, row in zip(rows, values):
        writer.writerow([name, *(f"{v:.4f}" for v in row)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# cross-label evaluation


@dataclass
class CrossLabelResult:
    sources: list[str]
    image_ids: list[str]
    # accuracy[s, t, fold, repeat]: model trained on set s scored against set t
    accuracy: np.ndarray
    # predictions[s, repeat, image]: each image predicted by the model whose validation fold holds it
    predictions: np.ndarray
    # best_predictions[s, image]: per fold, the repeat with the best self-scored accuracy
    best_predictions: np.ndarray
    folds: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.accuracy.mean(axis=(2, 3))

    @property
    def std(self) -> np.ndarray:
        return self.accuracy.std(axis=(2, 3))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trained_on", *(f"{t}_{s}" for t in self.sources for s in ("mean", "std"))])
        mean, std = self.mean, self.std
        for i, name in enumerate(self.sources):
            row = [name]
            for j in range(len(self.sources)):
                row += [fmt(mean[i, j]), fmt(std[i, j])]
            writer.writerow(row)
        return buf.getvalue()

    def agreement(self, k: int, classes: Sequence[str] | None = None) -> AgreementMatrix:
        return agreement_matrix(list(self.best_predictions), k, classes)


def cross_label_eval(images, label_sets: Sequence[LabelSet], cfgs, folds: int = 5, repeats: int = 10,
                     kind: EnsembleKind = EnsembleKind.OGS, vcfg: ViewConfig | None = None, seed: int = 0,
                     k: int | None = None, jobs: int = 1, image_ids: Sequence[str] | None = None,
                     inputs: ViewInputs | None = None) -> CrossLabelResult:
    """k-fold training on each label set, scoring validation predictions against every set.

    ``images`` is a Dataset (matched to labels by ``image_ids``) or a list of
    RGBA arrays in the sorted image-id order of the label sets. Folds are
    stratified on the first label set and shared by all of them.
    """
    vcfg = vcfg or ViewConfig()
    kind = EnsembleKind(kind)
    ids = _shared_ids(label_sets)
    if image_ids is None:
        image_ids = getattr(images, "image_ids", None) or ids
    position = {img: i for i, img in enumerate(image_ids)}
    missing = [i for i in ids if i not in position]
    if missing:
        raise ImageListMismatch(f"{len(missing)} labelled images are not in the image collection, e.g. {missing[0]}")
    idx = np.array([position[i] for i in ids], dtype=np.int64)
    inputs = inputs or ViewInputs(images, vcfg)
    truth = np.stack([s.aligned(ids) for s in label_sets])  # (S, n)
    k = k if k is not None else int(truth.max()) + 1
    assignment = fold_assignment(truth[0], folds, seed)

    n_sets, n = truth.shape
    tasks, slots = [], []
    views = member_views(kind)
    for s in range(n_sets):
        for f in range(folds):
            train_pos = np.flatnonzero(assignment != f)
            for r in range(repeats):
                for m, view in enumerate(views):
                    cfg = resolve_config(cfgs, view).with_seed(derive_seed(seed, s, f, r, m))
                    tasks.append(MemberTask(view, cfg, idx[train_pos], truth[s, train_pos], k))
                slots.append((s, f, r))
    trained = train_members(tasks, inputs, jobs)

    accuracy = np.zeros((n_sets, n_sets, folds, repeats))
    predictions = np.zeros((n_sets, repeats, n), dtype=np.int64)
    m = len(views)
    for j, (s, f, r) in enumerate(slots):
        model = EnsembleModel(kind, list(zip(views, trained[j * m:(j + 1) * m])), k, inputs.cfg)
        val_pos = np.flatnonzero(assignment == f)
        probs = predict_inputs(model, inputs, idx[val_pos])
        predictions[s, r, val_pos] = np.argmax(probs, axis=1)
        for t in range(n_sets):
            accuracy[s, t, f, r] = acc_at_k(probs, truth[t, val_pos], 1)

    best = np.zeros((n_sets, n), dtype=np.int64)
    for s in range(n_sets):
        for f in range(folds):
            val_pos = np.flatnonzero(assignment == f)
            r_best = int(np.argmax(accuracy[s, s, f]))
            best[s, val_pos] = predictions[s, r_best, val_pos]
    return CrossLabelResult([s.source_name for s in label_sets], list(ids), accuracy, predictions, best, assignment)
