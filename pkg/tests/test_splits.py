from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiview.errors import InsufficientSamples
from multiview.eval.splits import fold_assignment, kfold_split, ratio_counts, stratified_split


def _disjoint_cover(split, n):
    parts = [split.indices(p) for p in ("train", "validation", "test")]
    flat = np.concatenate(parts)
    return len(flat) == len(set(flat.tolist())) and set(flat.tolist()) <= set(range(n))


def test_ratio_counts_floor_and_remainder():
    assert ratio_counts(150, 110 / 150, 20 / 150) == (110, 20, 20)
    assert ratio_counts(10, 0.3, 0.3) == (3, 3, 4)
    assert ratio_counts(80, 0.7, 0.1) == (56, 8, 16)
    with pytest.raises(ValueError):
        ratio_counts(10, 0.8, 0.3)


def test_stratified_counts_per_class():
    labels = np.repeat(np.arange(4), 150)
    split = stratified_split(labels, seed=1, counts=(110, 20, 20))
    assert split.counts() == [(110, 20, 20)] * 4
    for c, group in enumerate(split.train):
        assert (labels[group] == c).all()
    assert _disjoint_cover(split, len(labels))


def test_stratified_is_seeded():
    labels = np.repeat(np.arange(3), 30)
    a = stratified_split(labels, 5, ratios=(0.5, 0.2))
    assert a == stratified_split(labels, 5, ratios=(0.5, 0.2))
    assert a != stratified_split(labels, 6, ratios=(0.5, 0.2))


def test_stratified_rejects_oversized_counts():
    with pytest.raises(InsufficientSamples):
        stratified_split(np.repeat(np.arange(2), 5), 0, counts=(4, 1, 1))
    with pytest.raises(ValueError):
        stratified_split(np.zeros(4, int), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(5, 30), st.integers(0, 1000))
def test_kfold_partitions(k, per_class, seed):
    labels = np.repeat(np.arange(k), per_class)
    folds = kfold_split(labels, 5, seed)
    seen = np.concatenate([f.indices("validation") for f in folds])
    np.testing.assert_array_equal(np.sort(seen), np.arange(len(labels)))
    for f in folds:
        assert set(f.indices("train").tolist()).isdisjoint(f.indices("validation").tolist())
        assert len(f.indices("train")) + len(f.indices("validation")) == len(labels)
        sizes = [len(v) for v in f.validation]
        assert max(sizes) - min(sizes) <= 1


def test_fold_assignment_balanced():
    labels = np.repeat(np.arange(2), 12)
    a = fold_assignment(labels, 4, 0)
    for c in range(2):
        assert np.bincount(a[labels == c], minlength=4).tolist() == [3, 3, 3, 3]
    with pytest.raises(InsufficientSamples):
        fold_assignment(np.array([0, 0, 1]), 3, 0)
