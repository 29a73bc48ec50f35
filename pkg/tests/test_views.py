from __future__ import annotations

import numpy as np
import pytest

from multiview import imaging
from multiview.errors import EvenOrTooSmallBlocksize, SpecOutOfRange
from multiview.views import (
    ViewConfig,
    ViewKind,
    prepare_input,
    resize_nearest,
    skeleton_mask,
    transform_view,
    view_input,
)


def _sample(side=24, seed=0):
    rng = np.random.default_rng(seed)
    img = np.full((side, side, 4), 230, np.uint8)
    img[..., 3] = 255
    img[side // 3: 2 * side // 3, 2:-2, :3] = rng.integers(0, 60, (side // 3, side - 4, 3))
    return img


def test_view_kind_parse_and_codes():
    assert ViewKind.parse("G") is ViewKind.GREY
    assert ViewKind.parse("Skeleton") is ViewKind.SKELETON
    assert [v.code for v in ViewKind] == ["O", "G", "S"]
    with pytest.raises(ValueError):
        ViewKind.parse("X")


def test_view_config_validation():
    with pytest.raises(EvenOrTooSmallBlocksize):
        ViewConfig(blocksize=4)
    with pytest.raises(SpecOutOfRange):
        ViewConfig(input_side=2)
    assert ViewConfig().to_dict() == {"blocksize": 41, "offset": 2, "input_side": 64}


def test_original_view_is_composite():
    img = _sample()
    img[0, 0, 3] = 0
    out = transform_view(img, ViewKind.ORIGINAL)
    np.testing.assert_array_equal(out, imaging.composite_alpha(img))
    assert out[0, 0, :3].tolist() == [255, 255, 255]


def test_grey_view_replicates_channel():
    img = _sample()
    out = transform_view(img, ViewKind.GREY)
    assert out.shape == img.shape
    assert (out[..., 0] == out[..., 1]).all() and (out[..., 1] == out[..., 2]).all()
    np.testing.assert_array_equal(out[..., 0], imaging.to_grey(img))


def test_skeleton_view_white_on_black():
    cfg = ViewConfig(blocksize=11, offset=2, input_side=16)
    img = _sample()
    out = transform_view(img, ViewKind.SKELETON, cfg)
    assert set(np.unique(out[..., :3]).tolist()) <= {0, 255}
    np.testing.assert_array_equal(out[..., 0] == 255, skeleton_mask(img, cfg))
    assert (out[..., 0] == 255).any()


def test_skeleton_ignores_transparent_pixels():
    cfg = ViewConfig(blocksize=11, offset=2, input_side=16)
    img = _sample()
    img[..., 3] = 0
    assert not skeleton_mask(img, cfg).any()


def test_resize_nearest_indices():
    src = np.arange(25).reshape(5, 5)
    out = resize_nearest(src, 3)
    # rows and cols sampled at floor(d * 5 / 3) = 0, 1, 3
    assert out.tolist() == [[0, 1, 3], [5, 6, 8], [15, 16, 18]]
    np.testing.assert_array_equal(resize_nearest(src, 5), src)


def test_prepare_input_range_and_shape():
    x = prepare_input(_sample(), ViewConfig(input_side=8))
    assert x.shape == (8, 8, 3) and x.dtype == np.float64
    assert 0.0 <= x.min() and x.max() <= 1.0


def test_view_input_deterministic():
    cfg = ViewConfig(blocksize=11, input_side=12)
    for view in ViewKind:
        np.testing.assert_array_equal(view_input(_sample(), view, cfg), view_input(_sample(), view, cfg))
