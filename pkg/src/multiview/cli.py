"""Command-line front end.

Every subcommand resolves its settings from built-in defaults, then an
optional ``--config`` JSON file, then explicit flags, and writes the result
to ``<out>/run_config.json``. Re-running with ``--config <out>/run_config.json``
reproduces the outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, imaging
from .classifier import TrainConfig
from .consistency import (
    LabelSet,
    agreement_matrix,
    consistency_matrix,
    cross_label_eval,
    read_label_csv,
)
from .dataset import Dataset, SyntheticSpec, generate_synthetic, load_directory, load_split, persist_split
from .ensemble import EnsembleKind, ViewInputs, member_views, unique_sample_expectation
from .errors import MultiviewError
from .eval.protocols import (
    DEFAULT_BATCHES,
    DEFAULT_LRS,
    SWEEP_TRAIN_RATIOS,
    grid_search,
    ratio_sweep,
    report_csv,
    run_experiment,
)
from .eval.splits import stratified_split
from .views import ViewConfig, ViewKind, transform_view

log = logging.getLogger("multiview")

RUN_CONFIG_NAME = "run_config.json"


@dataclass
class RunConfig:
    command: str = ""
    out: str = "out"
    dataset: str | None = None
    synthetic: dict | None = None
    kinds: list[str] = field(default_factory=lambda: ["O", "G", "S", "OOO", "OGS"])
    blocksize: int = 41
    offset: int = 2
    input_side: int = 64
    learning_rate: float = 3e-4
    batch_size: int = 32
    epochs: int = 500
    grid: bool = False
    grid_lrs: list[float] = field(default_factory=lambda: list(DEFAULT_LRS))
    grid_batches: list[int] = field(default_factory=lambda: list(DEFAULT_BATCHES))
    grid_runs: int = 2
    runs: int = 20
    seed: int = 0
    jobs: int = 1
    split_file: str | None = None
    split_counts: list[int] | None = None
    split_ratios: list[float] = field(default_factory=lambda: [0.7, 0.1])
    train_ratios: list[float] = field(default_factory=lambda: list(SWEEP_TRAIN_RATIOS))
    val_ratio: float = 0.1
    labels: str | None = None
    folds: int = 5
    repeats: int = 10
    inputs: list[str] = field(default_factory=list)

    def view_config(self) -> ViewConfig:
        return ViewConfig(self.blocksize, self.offset, self.input_side)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, self.seed)

    def kind_list(self) -> list[EnsembleKind]:
        return [EnsembleKind.parse(k) for k in self.kinds]

    def write(self, directory: Path) -> None:
        (directory / RUN_CONFIG_NAME).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# argument parsing


def _csv_list(cast):
    def parse(text: str):
        return [cast(t) for t in text.split(",") if t.strip()]
    return parse


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    g.add_argument("--out", help="output directory")
    g.add_argument("--dataset", help="dataset root (class subdirectories or manifest.csv)")
    g.add_argument("--synthetic", nargs="?", const="{}", metavar="JSON",
                   help="use a generated dataset; optional JSON overrides of the synthetic spec")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--runs", type=int, help="independent training runs per kind")
    g.add_argument("--kinds", type=_csv_list(str), help="comma-separated kinds, e.g. O,G,S,OOO,OGS")
    g.add_argument("--blocksize", type=int, help="adaptive threshold window (odd)")
    g.add_argument("--offset", type=int, help="adaptive threshold offset")
    g.add_argument("--input-side", dest="input_side", type=int, help="classifier input side in pixels")
    g.add_argument("--jobs", type=int, help="worker processes; outputs do not depend on it")
    g.add_argument("--lr", dest="learning_rate", type=float, help="SGD learning rate")
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--grid", action="store_const", const=True, default=None,
                   help="select lr and batch size per view by grid search first")
    g.add_argument("--split", dest="split_file", help="split JSON written by the split subcommand")
    g.add_argument("--split-counts", dest="split_counts", type=_csv_list(int), metavar="TRAIN,VAL,TEST")
    g.add_argument("--split-ratios", dest="split_ratios", type=_csv_list(float), metavar="TRAIN,VAL")
    g.add_argument("-v", "--verbose", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiview", description="Multiview ensemble experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_common(p)
        return p

    p = add("transform", "write the Original/Grey/Skeleton views of PNG files")
    p.add_argument("inputs", nargs="*", help="PNG files")
    add("gen-synthetic", "render a synthetic dataset as a directory tree")
    add("split", "write a stratified train/validation/test split file")
    add("train", "train ensembles on the split's training part and save them")
    add("eval", "repeated train/test runs per kind, one table row per kind")
    p = add("sweep-ratio", "metrics across training-set ratios")
    p.add_argument("--train-ratios", dest="train_ratios", type=_csv_list(float))
    p.add_argument("--val-ratio", dest="val_ratio", type=float)
    add("bagging-compare", "multiview ensembles against OOO bagging")
    p = add("grid-search", "learning-rate x batch-size search per view")
    p.add_argument("--grid-lrs", dest="grid_lrs", type=_csv_list(float))
    p.add_argument("--grid-batches", dest="grid_batches", type=_csv_list(int))
    for name, text in (("consistency", "pairwise consistency rates of label sets"),
                       ("cross-label", "k-fold training on each label set, scored against all sets"),
                       ("agreement", "per-class agreement matrix of label sets")):
        p = add(name, text)
        p.add_argument("--labels", help="CSV with columns image_id,label,source")
        if name == "cross-label":
            p.add_argument("--folds", type=int)
            p.add_argument("--repeats", type=int)
    return parser


_FLAG_ONLY = {"config", "verbose"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = asdict(RunConfig())
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(merged)
        if unknown:
            raise MultiviewError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    names = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names and key not in _FLAG_ONLY and value is not None:
            if key == "inputs" and not value:
                continue
            merged[key] = value
    if isinstance(merged.get("synthetic"), str):
        merged["synthetic"] = json.loads(merged["synthetic"])
    merged["command"] = args.command
    for key in ("dataset", "labels", "split_file"):
        if merged.get(key):
            merged[key] = str(Path(merged[key]).resolve())
    merged["inputs"] = [str(Path(p).resolve()) for p in merged.get("inputs") or []]
    merged["out"] = str(Path(merged["out"]).resolve())
    if merged.get("dataset") and merged.get("synthetic") is not None:
        raise MultiviewError("pass either --dataset or --synthetic, not both")
    return RunConfig(**merged)


# ---------------------------------------------------------------------------
# helpers


def _load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.dataset:
        return load_directory(cfg.dataset)
    if cfg.synthetic is not None:
        return generate_synthetic(SyntheticSpec.from_dict(cfg.synthetic))
    raise MultiviewError("no data source: pass --dataset DIR or --synthetic")


def _split(cfg: RunConfig, dataset: Dataset):
    if cfg.split_file:
        return load_split(cfg.split_file, dataset)
    if cfg.split_counts:
        return stratified_split(dataset, cfg.seed, counts=cfg.split_counts)
    return stratified_split(dataset, cfg.seed, ratios=cfg.split_ratios)


def _needed_views(kinds) -> list[ViewKind]:
    views = {v for kind in kinds for v in member_views(kind)}
    return [v for v in ViewKind if v in views]


def _train_configs(cfg: RunConfig, dataset, split, inputs, kinds, out: Path):
    """Fixed TrainConfig, or per-view grid-search winners when ``grid`` is set."""
    if not cfg.grid:
        return cfg.train_config()
    best, rows = {}, []
    for view in _needed_views(kinds):
        result = grid_search(dataset, view, split, cfg.grid_lrs, cfg.grid_batches, cfg.epochs,
                             cfg.grid_runs, cfg.view_config(), cfg.seed, cfg.jobs, inputs)
        best[view] = result.best
        rows += [(view.value, c) for c in result.cells]
    _write_grid_csv(out / "grid_search.csv", rows, best)
    return best


def _write_grid_csv(path: Path, rows, best) -> None:
    lines = ["view,learning_rate,batch_size,mean_val_acc_at_1,runs,selected"]
    for view, c in rows:
        chosen = best[ViewKind(view)]
        sel = int(chosen.learning_rate == c["learning_rate"] and chosen.batch_size == c["batch_size"])
        lines.append(f"{view},{c['learning_rate']},{c['batch_size']},{c['mean_val_acc_at_1']:.2f},"
                     f"{len(c['val_acc_at_1'])},{sel}")
    path.write_text("\n".join(lines) + "\n")


def _labels(cfg: RunConfig) -> tuple[list[str], list[LabelSet]]:
    if not cfg.labels:
        raise MultiviewError("--labels CSV is required")
    return read_label_csv(cfg.labels)


# ---------------------------------------------------------------------------
# subcommands


def cmd_transform(cfg: RunConfig, out: Path) -> None:
    if not cfg.inputs:
        raise MultiviewError("transform needs at least one input PNG")
    vcfg = cfg.view_config()
    for path in cfg.inputs:
        img = imaging.read_png(path)
        stem = Path(path).stem
        for view in ViewKind:
            imaging.write_png(out / f"{stem}_{view.code}.png", transform_view(img, view, vcfg))


def cmd_gen_synthetic(cfg: RunConfig, out: Path) -> None:
    spec = SyntheticSpec.from_dict(cfg.synthetic or {})
    generate_synthetic(spec).write(out / "dataset")
    (out / "synthetic_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def cmd_split(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    persist_split(_split(cfg, dataset), out / "split.json", dataset)


def cmd_train(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    split = _split(cfg, dataset)
    kinds = cfg.kind_list()
    inputs = ViewInputs(dataset, cfg.view_config())
    cfgs = _train_configs(cfg, dataset, split, inputs, kinds, out)
    result = run_experiment(dataset, kinds, 1, split, cfgs, cfg.view_config(), cfg.seed, cfg.jobs, inputs)
    for kind in kinds:
        result.models[kind.value][0].save(out / "models" / kind.value)
    (out / "train_summary.csv").write_text(report_csv(result.reports))


def cmd_eval(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    split = _split(cfg, dataset)
    kinds = cfg.kind_list()
    inputs = ViewInputs(dataset, cfg.view_config())
    cfgs = _train_configs(cfg, dataset, split, inputs, kinds, out)
    result = run_experiment(dataset, kinds, cfg.runs, split, cfgs, cfg.view_config(), cfg.seed, cfg.jobs, inputs)
    (out / "table.csv").write_text(report_csv(result.reports))
    report = {"classes": dataset.classes, "rows": [r.to_dict() for r in result.reports]}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for kind in kinds:
        # first run's confusion matrix, rows = actual class
        cm = result.confusions[kind.value][0]
        (out / f"confusion_{kind.value}.csv").write_text(cm.to_csv(dataset.classes))


def cmd_sweep_ratio(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    kinds = cfg.kind_list()
    inputs = ViewInputs(dataset, cfg.view_config())
    rows = ratio_sweep(dataset, kinds, cfg.train_config(), cfg.train_ratios, cfg.val_ratio, cfg.runs,
                       cfg.view_config(), cfg.seed, cfg.jobs, inputs)
    (out / "ratio_sweep.csv").write_text(report_csv(rows))


def cmd_bagging_compare(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    split = _split(cfg, dataset)
    kinds = cfg.kind_list()
    if EnsembleKind.OOO_BAGGING not in kinds:
        kinds.append(EnsembleKind.OOO_BAGGING)
    inputs = ViewInputs(dataset, cfg.view_config())
    cfgs = _train_configs(cfg, dataset, split, inputs, kinds, out)
    result = run_experiment(dataset, kinds, cfg.runs, split, cfgs, cfg.view_config(), cfg.seed, cfg.jobs, inputs)

    pool = [len(a) + len(b) for a, b in zip(split.train, split.validation)]
    extra = {}
    for kind in kinds:
        if kind is EnsembleKind.OOO_BAGGING:
            labels = dataset.labels
            unique = []
            for model in result.models[kind.value]:
                for oob in model.out_of_bag:
                    oob_counts = np.bincount(labels[np.asarray(oob, dtype=np.int64)], minlength=dataset.class_count)
                    unique.append(float(np.mean(np.asarray(pool) - oob_counts)))
            expected = float(np.mean([unique_sample_expectation(n) for n in pool]))
            observed = float(np.mean(unique))
        else:
            expected = observed = float(np.mean([len(t) for t in split.train]))
        extra[kind.value] = {"unique_per_class_expected": f"{expected:.3f}",
                             "unique_per_class_observed": f"{observed:.3f}"}
    (out / "bagging_compare.csv").write_text(report_csv(result.reports, extra=extra))


def cmd_grid_search(cfg: RunConfig, out: Path) -> None:
    dataset = _load_dataset(cfg)
    split = _split(cfg, dataset)
    inputs = ViewInputs(dataset, cfg.view_config())
    grid_cfg = RunConfig(**{**asdict(cfg), "grid": True})
    best = _train_configs(grid_cfg, dataset, split, inputs, cfg.kind_list(), out)
    doc = {view.value: c.to_dict() for view, c in best.items()}
    (out / "best_configs.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_consistency(cfg: RunConfig, out: Path) -> None:
    _, sets = _labels(cfg)
    (out / "consistency.csv").write_text(consistency_matrix(sets).to_csv())


def cmd_cross_label(cfg: RunConfig, out: Path) -> None:
    classes, sets = _labels(cfg)
    dataset = _load_dataset(cfg)
    kinds = cfg.kind_list()
    kind = kinds[-1] if EnsembleKind.OGS not in kinds else EnsembleKind.OGS
    result = cross_label_eval(dataset, sets, cfg.train_config(), cfg.folds, cfg.repeats, kind,
                              cfg.view_config(), cfg.seed, k=len(classes), jobs=cfg.jobs)
    (out / "cross_label.csv").write_text(result.to_csv())
    (out / "agreement.csv").write_text(result.agreement(len(classes), classes).to_csv())


def cmd_agreement(cfg: RunConfig, out: Path) -> None:
    classes, sets = _labels(cfg)
    (out / "agreement.csv").write_text(agreement_matrix(sets, len(classes), classes).to_csv())


COMMANDS = {
    "transform": cmd_transform,
    "gen-synthetic": cmd_gen_synthetic,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-ratio": cmd_sweep_ratio,
    "bagging-compare": cmd_bagging_compare,
    "grid-search": cmd_grid_search,
    "consistency": cmd_consistency,
    "cross-label": cmd_cross_label,
    "agreement": cmd_agreement,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if cfg.synthetic is None and not cfg.dataset and args.command == "gen-synthetic":
            cfg.synthetic = {}
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.write(out)
        log.info("running %s into %s", cfg.command, out)
        COMMANDS[cfg.command](cfg, out)
    except (MultiviewError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"multiview {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
