"""Labelled image corpora: directory/manifest ingestion, split files and a
procedural generator of synthetic shell images."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import imaging
from .errors import (
    EmptyClass,
    FingerprintMismatch,
    MissingRoot,
    MultiviewError,
    SpecOutOfRange,
    UnreadableImage,
)

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("image_path", "class_name", "source_tag")


@dataclass(frozen=True)
class Entry:
    image_path: str
    class_name: str
    source_tag: str = ""


class Dataset:
    """A manifest plus a way to obtain each image as an RGBA array.

    Images are either held in memory (synthetic data) or decoded from
    ``root / image_path`` on first access.
    """

    def __init__(self, entries: Sequence[Entry], root=None, images=None):
        entries = list(entries)
        paths = [e.image_path for e in entries]
        if len(set(paths)) != len(paths):
            raise MultiviewError("manifest image paths must be unique")
        self.entries = entries
        self.classes = sorted({e.class_name for e in entries})
        if len(self.classes) < 2:
            raise MultiviewError(f"a dataset needs at least two classes, found {len(self.classes)}")
        index = {name: i for i, name in enumerate(self.classes)}
        self.labels = np.array([index[e.class_name] for e in entries], dtype=np.int64)
        self.root = Path(root) if root is not None else None
        if images is not None and len(images) != len(entries):
            raise MultiviewError("one image per manifest entry is required")
        self._images = list(images) if images is not None else [None] * len(entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def image_ids(self) -> list[str]:
        return [e.image_path for e in self.entries]

    def class_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.classes)}

    def image(self, i: int) -> np.ndarray:
        img = self._images[i]
        if img is None:
            if self.root is None:
                raise MultiviewError(f"no image source for entry {self.entries[i].image_path}")
            img = imaging.read_png(self.root / self.entries[i].image_path)
            self._images[i] = img
        return img

    def per_class_indices(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(self.class_count)]

    def manifest_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for e in self.entries:
            writer.writerow([e.image_path, e.class_name, e.source_tag])
        return buf.getvalue()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.manifest_csv().encode("utf-8")).hexdigest()

    def write(self, root) -> None:
        """Write images as PNG files plus ``manifest.csv`` under ``root``."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        for i, e in enumerate(self.entries):
            imaging.write_png(root / e.image_path, self.image(i))
        (root / MANIFEST_NAME).write_text(self.manifest_csv())


def _check_header(path: Path) -> None:
    try:
        with Image.open(path):
            pass
    except (UnidentifiedImageError, OSError) as exc:
        raise UnreadableImage(path, str(exc)) from exc


def load_directory(root) -> Dataset:
    """Index a corpus laid out as ``root/<class>/*.png`` or described by ``root/manifest.csv``.

    Only image headers are checked here; pixels are decoded on demand.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"dataset root {root} does not exist")
    manifest = root / MANIFEST_NAME
    if manifest.is_file():
        with manifest.open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(MANIFEST_COLUMNS[:2]) - set(reader.fieldnames or ())
            if missing:
                raise MultiviewError(f"{manifest} lacks columns {sorted(missing)}")
            entries = [
                Entry(row["image_path"], row["class_name"], row.get("source_tag") or "")
                for row in reader
            ]
    else:
        entries = []
        for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            files = sorted(p for p in class_dir.iterdir() if p.suffix.lower() == ".png")
            if not files:
                raise EmptyClass(f"class directory {class_dir} holds no PNG files")
            entries += [Entry(f.relative_to(root).as_posix(), class_dir.name, "") for f in files]
    entries.sort(key=lambda e: e.image_path)
    for e in entries:
        path = root / e.image_path
        if not path.is_file():
            raise UnreadableImage(path, "file not found")
        _check_header(path)
    if not entries:
        raise EmptyClass(f"no images found under {root}")
    return Dataset(entries, root=root)


# ---------------------------------------------------------------------------
# synthetic shells


@dataclass(frozen=True)
class ShellParams:
    whorl_count: int
    proloculus_radius: float
    eccentricity: float
    wall_thickness: float
    loosening_rate: float

    def astuple(self) -> tuple:
        return (self.whorl_count, self.proloculus_radius, self.eccentricity,
                self.wall_thickness, self.loosening_rate)

    def outer_radius(self) -> float:
        return self.proloculus_radius * self.loosening_rate ** (self.whorl_count - 1)


DEFAULT_SHELLS = (
    ShellParams(3, 4.0, 0.30, 2.0, 1.60),
    ShellParams(4, 4.0, 0.30, 2.0, 1.60),
    ShellParams(5, 3.0, 0.30, 2.0, 1.50),
    ShellParams(4, 5.0, 0.50, 2.0, 1.50),
    ShellParams(3, 6.0, 0.10, 3.0, 1.70),
    ShellParams(6, 2.5, 0.40, 2.0, 1.45),
)

BACKGROUND_LEVEL = 232
WALL_LEVEL = 50
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class SyntheticSpec:
    class_count: int = 6
    per_class: int = 80
    image_side: int = 64
    shells: tuple[ShellParams, ...] | None = None
    color_noise_amplitude: float = 60.0
    seed: int = 0

    def resolved_shells(self) -> tuple[ShellParams, ...]:
        if self.shells is not None:
            return tuple(self.shells)
        if self.class_count > len(DEFAULT_SHELLS):
            raise SpecOutOfRange(
                f"only {len(DEFAULT_SHELLS)} default shell classes; pass explicit shells for more"
            )
        return DEFAULT_SHELLS[: self.class_count]

    def validate(self) -> None:
        if self.class_count < 2:
            raise SpecOutOfRange("class_count must be >= 2")
        if self.per_class < 1:
            raise SpecOutOfRange("per_class must be >= 1")
        if self.image_side < 8:
            raise SpecOutOfRange("image_side must be >= 8")
        if self.color_noise_amplitude < 0:
            raise SpecOutOfRange("color_noise_amplitude must be >= 0")
        shells = self.resolved_shells()
        if len(shells) != self.class_count:
            raise SpecOutOfRange(f"{len(shells)} shell parameter sets for {self.class_count} classes")
        if len({s.astuple() for s in shells}) != len(shells):
            raise SpecOutOfRange("classes must have distinct shell parameters")
        for s in shells:
            if s.whorl_count < 1 or s.proloculus_radius <= 0 or s.wall_thickness <= 0:
                raise SpecOutOfRange(f"non-positive shell parameter in {s}")
            if not 0 <= s.eccentricity < 1 or s.loosening_rate <= 0:
                raise SpecOutOfRange(f"eccentricity or loosening rate out of range in {s}")
            if s.outer_radius() + s.wall_thickness + 3 > self.image_side / 2:
                raise SpecOutOfRange(f"shell {s} does not fit in a {self.image_side}px image")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shells"] = [asdict(s) for s in self.resolved_shells()]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if d.get("shells") is not None:
            d["shells"] = tuple(ShellParams(**s) if isinstance(s, dict) else ShellParams(*s) for s in d["shells"])
        return cls(**d)


def render_shell(params: ShellParams, side: int, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """Draw one shell: concentric elliptical walls, random pose, chroma-only noise."""
    theta = rng.uniform(0.0, math.pi)
    jitter = rng.uniform(-1.5, 1.5, size=2)
    scale = rng.uniform(0.95, 1.05)
    centre = (side - 1) / 2.0 + jitter
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    dx, dy = xx - centre[1], yy - centre[0]
    u = dx * math.cos(theta) + dy * math.sin(theta)
    v = -dx * math.sin(theta) + dy * math.cos(theta)
    # radial coordinate in which every whorl wall is a circle
    rho = np.hypot(u, v / (1.0 - params.eccentricity))

    walls = np.zeros((side, side), dtype=bool)
    half = params.wall_thickness / 2.0
    for i in range(params.whorl_count):
        r = scale * params.proloculus_radius * params.loosening_rate ** i
        walls |= np.abs(rho - r) < half
    outline = scale * params.outer_radius() + params.wall_thickness + 2.0

    base = np.where(walls, WALL_LEVEL, BACKGROUND_LEVEL).astype(np.float64)
    tint = rng.uniform(-amplitude, amplitude, size=3)
    noise = rng.uniform(-amplitude, amplitude, size=(side, side, 3)) + tint
    # remove the luma component so the noise is pure colour
    noise -= (noise @ _LUMA)[:, :, None]
    rgb = np.clip(np.rint(base[:, :, None] + noise), 0, 255).astype(np.uint8)

    out = np.empty((side, side, 4), dtype=np.uint8)
    out[:, :, :3] = rgb
    out[:, :, 3] = np.where(rho <= outline, 255, 0)
    return out


def generate_synthetic(spec: SyntheticSpec | None = None) -> Dataset:
    """Render ``per_class`` images for each class; fully determined by ``spec.seed``.

    Every image draws from its own seed stream, so generation order does not
    matter.
    """
    spec = spec or SyntheticSpec()
    spec.validate()
    shells = spec.resolved_shells()
    width = max(2, len(str(spec.class_count - 1)))
    entries, images = [], []
    for c, params in enumerate(shells):
        name = f"class_{c:0{width}d}"
        for j in range(spec.per_class):
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, c, j]))
            images.append(render_shell(params, spec.image_side, spec.color_noise_amplitude, rng))
            entries.append(Entry(f"{name}/img_{j:04d}.png", name, "synthetic"))
    return Dataset(entries, images=images)


# ---------------------------------------------------------------------------
# split files

SPLIT_FORMAT = "multiview.split/1"


def persist_split(split, path, dataset: Dataset) -> None:
    """Write ``split`` as JSON keyed by the dataset's manifest fingerprint.

    Keys: ``format``, ``seed``, ``fingerprint``, ``classes`` and
    ``train``/``validation``/``test``, each a list (one per class) of entry
    indices into the manifest.
    """
    doc = {
        "format": SPLIT_FORMAT,
        "seed": split.seed,
        "fingerprint": dataset.fingerprint(),
        "classes": dataset.classes,
        "train": [list(map(int, ix)) for ix in split.train],
        "validation": [list(map(int, ix)) for ix in split.validation],
        "test": [list(map(int, ix)) for ix in split.test],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_split(path, dataset: Dataset | None = None):
    from .eval.splits import SplitSpec

    doc = json.loads(Path(path).read_text())
    if doc.get("format") != SPLIT_FORMAT:
        raise MultiviewError(f"{path} is not a split file")
    if dataset is not None and doc["fingerprint"] != dataset.fingerprint():
        raise FingerprintMismatch(f"split {path} was made for a different dataset")
    return SplitSpec(
        train=[list(ix) for ix in doc["train"]],
        validation=[list(ix) for ix in doc["validation"]],
        test=[list(ix) for ix in doc["test"]],
        seed=doc["seed"],
    )
