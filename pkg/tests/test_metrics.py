from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiview.errors import LabelOutOfRange, LengthMismatch
from multiview.eval.metrics import (
    acc_at_k,
    confusion_matrix,
    macro_f1,
    micro_f1,
    per_class_f1,
    summarize_runs,
    top_k_ranking,
)
from oracles import acc_at_k_reference, confusion_reference, macro_f1_reference


def test_confusion_rows_are_actual():
    cm = confusion_matrix([1, 1, 0], [0, 1, 0], 2)
    assert cm.counts.tolist() == [[1, 1], [0, 1]]
    assert cm.total == 3
    assert cm.accuracy() == pytest.approx(200 / 3)
    assert cm.to_csv(["a", "b"]) == "actual\\predicted,a,b\na,1,1\nb,0,1\n"


def test_macro_f1_hand_computed():
    # class 0: tp=1 fp=0 fn=1 -> f1 = 2/3; class 1: tp=1 fp=1 fn=0 -> 2/3; class 2 absent -> 0
    preds, truths = [0, 1, 1], [0, 0, 1]
    np.testing.assert_allclose(per_class_f1(preds, truths, 3), [2 / 3, 2 / 3, 0.0])
    assert macro_f1(preds, truths, 3) == pytest.approx(100 * 4 / 9)


def test_acc_at_k_ties_favour_lower_index():
    probs = np.array([[0.4, 0.4, 0.2]])
    assert acc_at_k(probs, [0], 1) == 100.0
    assert acc_at_k(probs, [1], 1) == 0.0
    assert acc_at_k(probs, [1], 2) == 100.0
    np.testing.assert_array_equal(top_k_ranking(probs)[0], [0, 1, 2])


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(LabelOutOfRange):
        confusion_matrix([0, 2], [0, 1], 2)
    with pytest.raises(LengthMismatch):
        acc_at_k(np.ones((3, 2)) / 2, [0, 1], 1)


def test_summarize_runs_population_std():
    assert summarize_runs([3.0]) == (3.0, 0.0)
    mean, std = summarize_runs([1.0, 3.0])
    assert mean == 2.0 and std == 1.0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 16]), st.integers(1, 40))
def test_metrics_match_counting_oracles(seed, k, n):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(k), size=n)
    if seed % 3 == 0:
        probs = np.round(probs, 1)  # force ties
    truths = rng.integers(0, k, n)
    preds = top_k_ranking(probs)[:, 0]
    np.testing.assert_array_equal(confusion_matrix(preds, truths, k).counts, confusion_reference(preds, truths, k))
    assert macro_f1(preds, truths, k) == pytest.approx(macro_f1_reference(preds, truths, k), abs=1e-9)
    for top in (1, 3):
        assert acc_at_k(probs, truths, top) == pytest.approx(acc_at_k_reference(probs, truths, top), abs=1e-9)
    assert acc_at_k(probs, truths, 1) == micro_f1(preds, truths, k)
    assert acc_at_k(probs, truths, 3) >= acc_at_k(probs, truths, 1)
