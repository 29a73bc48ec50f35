"""View transforms (Original, Grey, Skeleton) and classifier input preparation."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from . import imaging
from .errors import EvenOrTooSmallBlocksize, SpecOutOfRange


class ViewKind(str, enum.Enum):
    ORIGINAL = "Original"
    GREY = "Grey"
    SKELETON = "Skeleton"

    @property
    def code(self) -> str:
        return self.value[0]

    @classmethod
    def parse(cls, text: str) -> "ViewKind":
        for kind in cls:
            if text in (kind.value, kind.code, kind.name):
                return kind
        raise ValueError(f"unknown view {text!r}")


@dataclass(frozen=True)
class ViewConfig:
    blocksize: int = 41
    offset: int = 2
    input_side: int = 64

    def __post_init__(self):
        if self.blocksize < 3 or self.blocksize % 2 == 0:
            raise EvenOrTooSmallBlocksize(f"blocksize must be odd and >= 3, got {self.blocksize}")
        if self.input_side < 8:
            raise SpecOutOfRange(f"input_side must be >= 8, got {self.input_side}")

    def to_dict(self) -> dict:
        return asdict(self)


def _replicate(channel: np.ndarray) -> np.ndarray:
    out = np.empty(channel.shape + (4,), dtype=np.uint8)
    out[:, :, :3] = channel[:, :, None]
    out[:, :, 3] = 255
    return out


def skeleton_mask(img, cfg: ViewConfig) -> np.ndarray:
    """Foreground of the Skeleton view as a boolean array."""
    rgba = imaging.as_rgba(img)
    grey = imaging.to_grey(imaging.composite_alpha(rgba))
    binary = imaging.binarize_adaptive(grey, cfg.blocksize, cfg.offset)
    binary &= rgba[:, :, 3] > 0
    return imaging.skeletonize(binary)


def transform_view(img, view: ViewKind, cfg: ViewConfig | None = None) -> np.ndarray:
    """Render ``img`` in the requested view as an opaque RGBA raster."""
    cfg = cfg or ViewConfig()
    view = ViewKind(view)
    if view is ViewKind.ORIGINAL:
        return imaging.composite_alpha(img)
    if view is ViewKind.GREY:
        return _replicate(imaging.to_grey(imaging.composite_alpha(img)))
    # white skeleton on black
    return _replicate(skeleton_mask(img, cfg).astype(np.uint8) * 255)


def resize_nearest(img: np.ndarray, side: int) -> np.ndarray:
    """Nearest-neighbour resize; destination index d samples ``floor(d * src / side)``."""
    h, w = img.shape[:2]
    rows = (np.arange(side) * h) // side
    cols = (np.arange(side) * w) // side
    return img[rows[:, None], cols[None, :]]


def prepare_input(img, cfg: ViewConfig | None = None) -> np.ndarray:
    """Resize a view raster to ``input_side`` square and scale RGB into [0, 1].

    Returns a float64 array of shape ``(side, side, 3)``.
    """
    cfg = cfg or ViewConfig()
    rgb = imaging.as_rgba(img)[:, :, :3]
    return resize_nearest(rgb, cfg.input_side).astype(np.float64) / 255.0


def view_input(img, view: ViewKind, cfg: ViewConfig | None = None) -> np.ndarray:
    return prepare_input(transform_view(img, view, cfg), cfg)
