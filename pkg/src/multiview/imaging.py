"""Pixel primitives: alpha compositing, grey conversion, adaptive binarization
and Zhang-Suen thinning.

Images are plain numpy arrays:

* RGBA raster: ``(H, W, 4)`` uint8
* grey image: ``(H, W)`` uint8
* binary image: ``(H, W)`` bool, True = foreground

All intensity arithmetic is done in integers so results are bit-exact.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EvenOrTooSmallBlocksize, ShapeMismatch, UnreadableImage

# Luma weights in thousandths: 0.299 R + 0.587 G + 0.114 B.
_GREY_WEIGHTS = (299, 587, 114)


def as_rgba(img) -> np.ndarray:
    """Coerce an (H, W), (H, W, 3) or (H, W, 4) uint8 array to RGBA."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ShapeMismatch(f"expected uint8 pixels, got {arr.dtype}")
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise ShapeMismatch(f"expected (H, W, 3|4) raster, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch("raster must be at least 1x1")
    if arr.shape[2] == 3:
        alpha = np.full(arr.shape[:2] + (1,), 255, dtype=np.uint8)
        arr = np.concatenate([arr, alpha], axis=2)
    return arr


def composite_alpha(img) -> np.ndarray:
    """Blend every pixel onto opaque white; the result has alpha 255 everywhere.

    ``out = round_half_up((c * A + 255 * (255 - A)) / 255)`` per colour channel.
    """
    rgba = as_rgba(img)
    c = rgba[:, :, :3].astype(np.int64)
    a = rgba[:, :, 3:4].astype(np.int64)
    num = c * a + 255 * (255 - a)
    rgb = (2 * num + 255) // 510
    out = np.empty_like(rgba)
    out[:, :, :3] = rgb.astype(np.uint8)
    out[:, :, 3] = 255
    return out


def to_grey(img) -> np.ndarray:
    """Luma of an (already composited) raster, rounded half up."""
    rgba = as_rgba(img)
    r, g, b = (rgba[:, :, i].astype(np.int64) for i in range(3))
    wr, wg, wb = _GREY_WEIGHTS
    grey = (wr * r + wg * g + wb * b + 500) // 1000
    return np.clip(grey, 0, 255).astype(np.uint8)


def _window_sums(grey: np.ndarray, blocksize: int) -> np.ndarray:
    half = blocksize // 2
    padded = np.pad(grey.astype(np.int64), half, mode="edge")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(0).cumsum(1)
    h, w = grey.shape
    b = blocksize
    return ii[b:b + h, b:b + w] - ii[:h, b:b + w] - ii[b:b + h, :w] + ii[:h, :w]


def binarize_adaptive(grey, blocksize: int = 41, offset: float = 2) -> np.ndarray:
    """Mark pixels darker than their local mean minus ``offset`` as foreground.

    The local mean is taken over a ``blocksize x blocksize`` window whose
    out-of-image part replicates the nearest edge pixel.
    """
    if blocksize < 3 or blocksize % 2 == 0:
        raise EvenOrTooSmallBlocksize(f"blocksize must be odd and >= 3, got {blocksize}")
    grey = np.asarray(grey)
    if grey.ndim != 2:
        raise ShapeMismatch(f"expected 2-D grey image, got shape {grey.shape}")
    area = blocksize * blocksize
    sums = _window_sums(grey, blocksize)
    # intensity < sum/area - offset, kept in integers when offset is integral
    if float(offset).is_integer():
        return grey.astype(np.int64) * area < sums - int(offset) * area
    return grey.astype(np.float64) < sums / area - offset


def _zs_subiteration(img: np.ndarray, first: bool) -> np.ndarray:
    """Return the mask of pixels one subiteration deletes."""
    p = np.pad(img, 1, mode="constant").astype(np.uint8)
    # P2..P9 clockwise from north
    p2 = p[:-2, 1:-1]
    p3 = p[:-2, 2:]
    p4 = p[1:-1, 2:]
    p5 = p[2:, 2:]
    p6 = p[2:, 1:-1]
    p7 = p[2:, :-2]
    p8 = p[1:-1, :-2]
    p9 = p[:-2, :-2]
    ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    a = sum(((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.uint8) for i in range(8))
    if first:
        c1 = (p2 & p4 & p6) == 0
        c2 = (p4 & p6 & p8) == 0
    else:
        c1 = (p2 & p4 & p8) == 0
        c2 = (p2 & p6 & p8) == 0
    return img & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2


def skeletonize(binary, return_history: bool = False):
    """Zhang-Suen thinning iterated until a full pass deletes nothing.

    Pixels outside the image count as background. With ``return_history``
    the foreground count after every full pass is returned as well.
    """
    img = np.asarray(binary).astype(bool).copy()
    if img.ndim != 2:
        raise ShapeMismatch(f"expected 2-D binary image, got shape {img.shape}")
    history = [int(img.sum())]
    while True:
        changed = False
        for first in (True, False):
            marks = _zs_subiteration(img, first)
            if marks.any():
                img &= ~marks
                changed = True
        history.append(int(img.sum()))
        if not changed:
            break
    if return_history:
        return img, history
    return img


# ---------------------------------------------------------------------------
# PNG I/O


def read_png(path) -> np.ndarray:
    """Decode an image file to an RGBA uint8 array."""
    try:
        with Image.open(path) as im:
            im.load()
            return np.asarray(im.convert("RGBA"), dtype=np.uint8).copy()
    except (OSError, ValueError, Image.DecompressionBombError) as exc:
        raise UnreadableImage(path, str(exc)) from exc


def write_png(path, img) -> None:
    """Write RGBA, grey (uint8 2-D) or binary (bool 2-D, foreground = 255) PNGs."""
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # fixed compression settings keep files byte-stable
    Image.fromarray(np.ascontiguousarray(arr)).save(path, format="PNG", optimize=False, compress_level=6)
