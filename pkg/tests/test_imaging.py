from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from multiview import imaging
from multiview.errors import EvenOrTooSmallBlocksize, ShapeMismatch, UnreadableImage
from oracles import components, random_blob, shapes, zhang_suen_reference


def test_grey_extremes():
    px = np.array([[[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    assert imaging.to_grey(px).tolist() == [[0, 255]]


def test_grey_primaries():
    px = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255]]], dtype=np.uint8)
    # 76.245, 149.685, 29.07 rounded half up
    assert imaging.to_grey(px).tolist() == [[76, 150, 29]]


def test_grey_half_rounds_up():
    # 0.299*R + 0.587*G + 0.114*B with R=G=0, B=5 gives 0.57 -> 1; with (1,0,1) gives 0.413 -> 0
    px = np.array([[[0, 0, 5], [1, 0, 1]]], dtype=np.uint8)
    assert imaging.to_grey(px).tolist() == [[1, 0]]


def test_composite_alpha_values():
    px = np.array([[[0, 0, 0, 0], [0, 0, 0, 255], [100, 50, 0, 128]]], dtype=np.uint8)
    out = imaging.composite_alpha(px)
    assert out[0, 0, :3].tolist() == [255, 255, 255]
    assert out[0, 1, :3].tolist() == [0, 0, 0]
    # (100*128 + 255*127) / 255 = 177.2..., (50*128 + 255*127)/255 = 152.1, (0 + 255*127)/255 = 127
    assert out[0, 2, :3].tolist() == [177, 152, 127]
    assert (out[..., 3] == 255).all()


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.uint8, (3, 4, 4)))
def test_composite_alpha_matches_fraction(px):
    out = imaging.composite_alpha(px).astype(int)
    c = px[:, :, :3].astype(int)
    a = px[:, :, 3:4].astype(int)
    exact = (c * a + 255 * (255 - a)) / 255
    assert np.all(np.abs(out[:, :, :3] - exact) <= 0.5)


def test_as_rgba_shapes():
    assert imaging.as_rgba(np.zeros((2, 3), np.uint8)).shape == (2, 3, 4)
    assert imaging.as_rgba(np.zeros((2, 3, 3), np.uint8))[..., 3].min() == 255
    with pytest.raises(ShapeMismatch):
        imaging.as_rgba(np.zeros((2, 3, 5), np.uint8))
    with pytest.raises(ShapeMismatch):
        imaging.as_rgba(np.zeros((2, 3, 3), np.float32))


def _binarize_reference(grey, blocksize, offset):
    h, w = grey.shape
    half = blocksize // 2
    out = np.zeros((h, w), bool)
    for r in range(h):
        for c in range(w):
            total = 0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    rr = min(max(r + dy, 0), h - 1)
                    cc = min(max(c + dx, 0), w - 1)
                    total += int(grey[rr, cc])
            out[r, c] = grey[r, c] < total / blocksize**2 - offset
    return out


@pytest.mark.parametrize("blocksize,offset", [(3, 0), (5, 2), (7, -1), (11, 2)])
def test_binarize_matches_window_loop(blocksize, offset):
    grey = np.random.default_rng(blocksize).integers(0, 256, (12, 15)).astype(np.uint8)
    np.testing.assert_array_equal(imaging.binarize_adaptive(grey, blocksize, offset),
                                  _binarize_reference(grey, blocksize, offset))


def test_binarize_flat_image_is_background():
    grey = np.full((10, 10), 90, np.uint8)
    assert not imaging.binarize_adaptive(grey, 5, 2).any()


@pytest.mark.parametrize("bad", [1, 2, 40, 0, -3])
def test_binarize_rejects_blocksize(bad):
    with pytest.raises(EvenOrTooSmallBlocksize):
        imaging.binarize_adaptive(np.zeros((5, 5), np.uint8), bad)


@pytest.mark.parametrize("name", sorted(shapes()))
def test_skeleton_matches_reference(name):
    img = shapes()[name]
    np.testing.assert_array_equal(imaging.skeletonize(img), zhang_suen_reference(img))


@pytest.mark.parametrize("seed", range(5))
def test_skeleton_random_blob_reference(seed):
    img = random_blob(seed)
    np.testing.assert_array_equal(imaging.skeletonize(img), zhang_suen_reference(img))


@pytest.mark.parametrize("name", ["bar_h", "bar_v", "bar_thick", "L", "T", "ring", "square_5"])
def test_skeleton_keeps_connectivity(name):
    img = shapes()[name]
    skel = imaging.skeletonize(img)
    assert skel.any()
    assert components(skel) == components(img)


def test_two_by_two_square_vanishes():
    img = np.zeros((6, 6), bool)
    img[2:4, 2:4] = True
    assert not imaging.skeletonize(img).any()


def test_skeleton_history_monotone():
    skel, history = imaging.skeletonize(random_blob(3), return_history=True)
    assert history[0] == random_blob(3).sum()
    assert all(a >= b for a, b in zip(history, history[1:]))
    assert history[-1] == history[-2] == skel.sum()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(bool, st.tuples(st.integers(1, 14), st.integers(1, 14))))
def test_skeleton_subset_and_idempotent(img):
    skel = imaging.skeletonize(img)
    assert not (skel & ~img).any()
    np.testing.assert_array_equal(imaging.skeletonize(skel), skel)


def test_skeleton_empty_and_full():
    assert not imaging.skeletonize(np.zeros((4, 4), bool)).any()
    single = np.zeros((3, 3), bool)
    single[1, 1] = True
    np.testing.assert_array_equal(imaging.skeletonize(single), single)


def test_png_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (7, 5, 4)).astype(np.uint8)
    imaging.write_png(tmp_path / "a.png", img)
    np.testing.assert_array_equal(imaging.read_png(tmp_path / "a.png"), img)
    mask = img[..., 0] > 128
    imaging.write_png(tmp_path / "m.png", mask)
    back = imaging.read_png(tmp_path / "m.png")
    np.testing.assert_array_equal(back[..., 0] == 255, mask)


def test_png_write_is_byte_stable(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (9, 9, 4)).astype(np.uint8)
    imaging.write_png(tmp_path / "a.png", img)
    imaging.write_png(tmp_path / "b.png", img)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_read_png_unreadable(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not a png")
    with pytest.raises(UnreadableImage) as info:
        imaging.read_png(bad)
    assert str(info.value.path) == str(bad)
