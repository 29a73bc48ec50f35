"""Multiview ensembles: member construction, soft voting and the bagging baseline."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import parallel
from .classifier import TrainConfig, TrainedClassifier, predict_batch, train_arrays
from .errors import EmptyMemberList, EmptyTrainingSet, LengthMismatch
from .seeds import derive_seed
from .views import ViewConfig, ViewKind, resize_nearest, transform_view


class EnsembleKind(str, enum.Enum):
    O = "O"
    G = "G"
    S = "S"
    OOO = "OOO"
    OGS = "OGS"
    OOO_BAGGING = "OOO_bagging"

    @classmethod
    def parse(cls, text: str) -> "EnsembleKind":
        for kind in cls:
            if text.strip().lower() in (kind.value.lower(), kind.name.lower()):
                return kind
        raise ValueError(f"unknown ensemble kind {text!r}")


_MEMBER_VIEWS = {
    EnsembleKind.O: (ViewKind.ORIGINAL,),
    EnsembleKind.G: (ViewKind.GREY,),
    EnsembleKind.S: (ViewKind.SKELETON,),
    EnsembleKind.OOO: (ViewKind.ORIGINAL,) * 3,
    EnsembleKind.OGS: (ViewKind.ORIGINAL, ViewKind.GREY, ViewKind.SKELETON),
    EnsembleKind.OOO_BAGGING: (ViewKind.ORIGINAL,) * 3,
}


def member_views(kind: EnsembleKind) -> tuple[ViewKind, ...]:
    return _MEMBER_VIEWS[EnsembleKind(kind)]


@dataclass
class EnsembleModel:
    kind: EnsembleKind
    members: list[tuple[ViewKind, TrainedClassifier]]
    class_count: int
    view_config: ViewConfig = field(default_factory=ViewConfig)
    # bagging only: the out-of-bag dataset indices of each member
    out_of_bag: list[list[int]] | None = None

    def __post_init__(self):
        if not self.members:
            raise EmptyMemberList("an ensemble needs at least one member")
        if any(m.class_count != self.class_count for _, m in self.members):
            raise LengthMismatch("all members must share the class count")

    @property
    def views(self) -> list[ViewKind]:
        return [v for v, _ in self.members]

    def save(self, directory) -> None:
        """Write ``ensemble.json`` plus one ``member_<i>.json`` classifier file per member."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "kind": self.kind.value,
            "views": [v.value for v in self.views],
            "class_count": self.class_count,
            "view_config": self.view_config.to_dict(),
            "members": [f"member_{i}.json" for i in range(len(self.members))],
        }
        if self.out_of_bag is not None:
            manifest["out_of_bag"] = self.out_of_bag
        for name, (_, clf) in zip(manifest["members"], self.members):
            clf.save(directory / name)
        (directory / "ensemble.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory) -> "EnsembleModel":
        directory = Path(directory)
        manifest = json.loads((directory / "ensemble.json").read_text())
        members = [
            (ViewKind(v), TrainedClassifier.load(directory / name))
            for v, name in zip(manifest["views"], manifest["members"])
        ]
        return cls(
            EnsembleKind(manifest["kind"]),
            members,
            manifest["class_count"],
            ViewConfig(**manifest["view_config"]),
            manifest.get("out_of_bag"),
        )


# ---------------------------------------------------------------------------
# combination


def soft_vote(zs) -> np.ndarray:
    """Elementwise mean of the member probability vectors."""
    if len(zs) == 0:
        raise EmptyMemberList("soft_vote needs at least one probability vector")
    lengths = {len(z) for z in zs}
    if len(lengths) != 1:
        raise LengthMismatch(f"probability vectors of differing lengths {sorted(lengths)}")
    return np.mean(np.asarray(zs, dtype=np.float64), axis=0)


def decide(z) -> int:
    """Index of the largest probability; the lowest index wins ties."""
    return int(np.argmax(np.asarray(z)))


# ---------------------------------------------------------------------------
# view inputs


class ViewInputs:
    """Per-view classifier inputs for a fixed image collection, computed once per view.

    ``source`` is a sequence of RGBA arrays or any object with ``__len__``
    and ``image(i)`` (such as :class:`multiview.dataset.Dataset`).
    """

    def __init__(self, source, cfg: ViewConfig | None = None):
        self.source = source
        self.cfg = cfg or ViewConfig()
        self._raw: dict[ViewKind, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.source)

    def _image(self, i: int):
        if hasattr(self.source, "image"):
            return self.source.image(i)
        return self.source[i]

    def raw(self, view: ViewKind) -> np.ndarray:
        """uint8 array ``(n, side, side, 3)`` of resized view rasters."""
        view = ViewKind(view)
        if view not in self._raw:
            side = self.cfg.input_side
            out = np.empty((len(self), side, side, 3), dtype=np.uint8)
            for i in range(len(self)):
                rendered = transform_view(self._image(i), view, self.cfg)
                out[i] = resize_nearest(rendered[:, :, :3], side)
            self._raw[view] = out
        return self._raw[view]

    def get(self, view: ViewKind, indices=None) -> np.ndarray:
        raw = self.raw(view)
        if indices is not None:
            raw = raw[np.asarray(indices, dtype=np.int64)]
        return raw.astype(np.float64) / 255.0

    def payload(self, views: Sequence[ViewKind]) -> dict:
        return {ViewKind(v).value: self.raw(v) for v in views}


@dataclass(frozen=True)
class MemberTask:
    view: ViewKind
    cfg: TrainConfig
    indices: np.ndarray
    labels: np.ndarray
    k: int


def _run_member(task: MemberTask) -> TrainedClassifier:
    raw = parallel.shared()[task.view.value]
    x = raw[task.indices].astype(np.float64) / 255.0
    return train_arrays(x, task.labels, task.cfg, task.k)


def train_members(tasks: Sequence[MemberTask], inputs: ViewInputs, jobs: int = 1) -> list[TrainedClassifier]:
    views = sorted({t.view for t in tasks}, key=lambda v: v.value)
    return parallel.map_tasks(_run_member, tasks, jobs, inputs.payload(views))


def member_configs(cfgs, kind: EnsembleKind) -> list[TrainConfig]:
    """Expand one TrainConfig to ``m`` members with seeds ``seed, seed+1, ...``."""
    m = len(member_views(kind))
    if isinstance(cfgs, TrainConfig):
        return [cfgs.with_seed(cfgs.seed + i) for i in range(m)]
    cfgs = list(cfgs)
    if len(cfgs) != m:
        raise LengthMismatch(f"{kind.value} needs {m} member configs, got {len(cfgs)}")
    return cfgs


def multiview_tasks(indices, labels, kind: EnsembleKind, cfgs, k: int) -> list[MemberTask]:
    kind = EnsembleKind(kind)
    if kind is EnsembleKind.OOO_BAGGING:
        raise ValueError("use build_bagging for OOO_bagging")
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) == 0:
        raise EmptyTrainingSet("training set is empty")
    labels = np.asarray(labels, dtype=np.int64)
    # every member sees every training image
    return [
        MemberTask(view, cfg, indices, labels, k)
        for view, cfg in zip(member_views(kind), member_configs(cfgs, kind))
    ]


def build_multiview(images, labels, kind: EnsembleKind, cfgs, vcfg: ViewConfig | None = None,
                    k: int | None = None, jobs: int = 1, inputs: ViewInputs | None = None,
                    indices=None) -> EnsembleModel:
    """Train an O, G, S, OOO or OGS ensemble.

    ``images`` is a sequence of RGBA arrays (or a Dataset) and ``labels`` the
    matching class ids. With ``indices`` only that subset is used for training.
    """
    vcfg = vcfg or ViewConfig()
    inputs = inputs or ViewInputs(images, vcfg)
    labels = np.asarray(labels, dtype=np.int64)
    k = k if k is not None else int(labels.max()) + 1
    if indices is None:
        indices = np.arange(len(labels))
    indices = np.asarray(indices, dtype=np.int64)
    kind = EnsembleKind(kind)
    tasks = multiview_tasks(indices, labels[indices], kind, cfgs, k)
    models = train_members(tasks, inputs, jobs)
    return EnsembleModel(kind, list(zip(member_views(kind), models)), k, inputs.cfg)


def member_probabilities(model: EnsembleModel, inputs: ViewInputs, indices=None) -> np.ndarray:
    """Array ``(m, n, k)`` of each member's predictions on its own view."""
    return np.stack([predict_batch(clf, inputs.get(view, indices)) for view, clf in model.members])


def predict_inputs(model: EnsembleModel, inputs: ViewInputs, indices=None) -> np.ndarray:
    """Soft-voted probability rows ``(n, k)``."""
    return member_probabilities(model, inputs, indices).mean(axis=0)


def ensemble_predict(model: EnsembleModel, img, vcfg: ViewConfig | None = None) -> np.ndarray:
    """Transform ``img`` into each member's view, predict, and soft-vote."""
    vcfg = vcfg or model.view_config
    zs = []
    for view, clf in model.members:
        rendered = transform_view(img, view, vcfg)
        x = resize_nearest(rendered[:, :, :3], vcfg.input_side).astype(np.float64) / 255.0
        zs.append(predict_batch(clf, x[None])[0])
    return soft_vote(zs)


# ---------------------------------------------------------------------------
# bagging


def bootstrap_sample(n: int, rng_seed: int) -> np.ndarray:
    """``n`` uniform draws with replacement from ``range(n)``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return np.random.default_rng(rng_seed).integers(0, n, size=n)


def out_of_bag(sample, n: int) -> np.ndarray:
    drawn = np.zeros(n, dtype=bool)
    drawn[np.asarray(sample)] = True
    return np.flatnonzero(~drawn)


def unique_sample_expectation(n: int) -> float:
    """Expected number of distinct items in ``n`` draws with replacement from ``n``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    # (1 - ((n-1)/n)**n) * n, with expm1/log1p to keep precision for large n
    return -float(np.expm1(n * np.log1p(-1.0 / n))) * n if n > 1 else 1.0


@dataclass(frozen=True)
class BaggingPlan:
    train: list[np.ndarray]  # per member, drawn dataset indices (repeats kept)
    out_of_bag: list[np.ndarray]  # per member, never-drawn dataset indices


def bagging_plan(per_class_pool: Sequence[Sequence[int]], rng_seed: int, members: int = 3,
                 test_reserved=None) -> BaggingPlan:
    """Draw, per member and per class, ``len(pool)`` indices with replacement from that class pool."""
    if test_reserved is not None:
        overlap = set(map(int, test_reserved)) & {int(i) for pool in per_class_pool for i in pool}
        if overlap:
            raise ValueError(f"bagging pool contains {len(overlap)} reserved test images")
    train, oob = [], []
    for m in range(members):
        drawn, left = [], []
        for c, pool in enumerate(per_class_pool):
            pool = np.asarray(pool, dtype=np.int64)
            sample = bootstrap_sample(len(pool), derive_seed(rng_seed, m, c))
            drawn.append(pool[sample])
            left.append(pool[out_of_bag(sample, len(pool))])
        train.append(np.concatenate(drawn))
        oob.append(np.sort(np.concatenate(left)))
    return BaggingPlan(train, oob)


def build_bagging(images, labels, per_class_pool, cfgs, vcfg: ViewConfig | None = None,
                  rng_seed: int = 0, test_reserved=None, k: int | None = None, jobs: int = 1,
                  inputs: ViewInputs | None = None) -> EnsembleModel:
    """OOO-bagging: three Original-view members, each on its own bootstrap resample."""
    vcfg = vcfg or ViewConfig()
    inputs = inputs or ViewInputs(images, vcfg)
    labels = np.asarray(labels, dtype=np.int64)
    k = k if k is not None else int(labels.max()) + 1
    plan = bagging_plan(per_class_pool, rng_seed, 3, test_reserved)
    cfgs = member_configs(cfgs, EnsembleKind.OOO_BAGGING)
    tasks = [
        MemberTask(ViewKind.ORIGINAL, cfg, idx, labels[idx], k)
        for cfg, idx in zip(cfgs, plan.train)
    ]
    models = train_members(tasks, inputs, jobs)
    return EnsembleModel(
        EnsembleKind.OOO_BAGGING,
        [(ViewKind.ORIGINAL, m) for m in models],
        k,
        inputs.cfg,
        out_of_bag=[o.tolist() for o in plan.out_of_bag],
    )
