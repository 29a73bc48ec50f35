from __future__ import annotations

import numpy as np

from multiview.classifier import TrainConfig
from multiview.ensemble import EnsembleKind, ViewInputs
from multiview.eval.protocols import MetricsReport, grid_search, ratio_sweep, report_csv, run_experiment
from multiview.eval.splits import stratified_split
from multiview.views import ViewConfig, ViewKind

VCFG = ViewConfig(blocksize=11, offset=2, input_side=8)
CFG = TrainConfig(learning_rate=0.01, batch_size=8, epochs=2)


def test_run_experiment_rows_and_jobs(tiny_dataset):
    split = stratified_split(tiny_dataset, 0, ratios=(0.6, 0.2))
    inputs = ViewInputs(tiny_dataset, VCFG)
    kinds = [EnsembleKind.O, EnsembleKind.OGS, EnsembleKind.OOO_BAGGING]
    a = run_experiment(tiny_dataset, kinds, 2, split, CFG, VCFG, 5, 1, inputs)
    b = run_experiment(tiny_dataset, kinds, 2, split, CFG, VCFG, 5, 2, inputs)
    assert [r.label["kind"] for r in a.reports] == ["O", "OGS", "OOO_bagging"]
    assert report_csv(a.reports) == report_csv(b.reports)
    for r in a.reports:
        assert len(r.runs["acc_at_1"]) == 2
        assert r.runs["acc_at_1"] == r.runs["micro_f1"]
    cm = a.confusions["OGS"][0]
    assert cm.total == len(split.indices("test"))
    oob = a.models["OOO_bagging"][0].out_of_bag
    test = set(split.indices("test").tolist())
    assert all(test.isdisjoint(o) for o in oob)


def test_runs_differ_only_by_training_seed(tiny_dataset):
    split = stratified_split(tiny_dataset, 0, ratios=(0.6, 0.2))
    res = run_experiment(tiny_dataset, [EnsembleKind.O], 2, split, CFG, VCFG, 0)
    m0, m1 = res.models["O"]
    assert m0.members[0][1] != m1.members[0][1]


def test_grid_search_ties_pick_smallest(tiny_dataset):
    split = stratified_split(tiny_dataset, 0, ratios=(0.6, 0.2))
    # with zero epochs every cell predicts uniformly, so all tie
    res = grid_search(tiny_dataset, ViewKind.GREY, split, lrs=(0.1, 0.01), batches=(16, 8),
                      epochs=0, runs=2, vcfg=VCFG)
    assert res.training_runs == 8
    assert (res.best.learning_rate, res.best.batch_size) == (0.01, 8)


def test_ratio_sweep_rows(tiny_dataset):
    rows = ratio_sweep(tiny_dataset, [EnsembleKind.G], CFG, (0.3, 0.5), 0.2, runs=1, vcfg=VCFG)
    assert [r.label for r in rows] == [{"train_ratio": 0.3, "kind": "G"}, {"train_ratio": 0.5, "kind": "G"}]


def test_report_csv_format():
    r = MetricsReport({"kind": "O"})
    r.add({"acc_at_1": 50.0, "acc_at_3": 100.0, "macro_f1": 40.0, "micro_f1": 50.0})
    r.add({"acc_at_1": 60.0, "acc_at_3": 100.0, "macro_f1": 45.555, "micro_f1": 60.0})
    text = report_csv([r], extra={"O": {"note": "x"}})
    assert text.splitlines() == [
        "kind,acc_at_1_mean,acc_at_1_std,acc_at_3_mean,acc_at_3_std,macro_f1_mean,macro_f1_std,note",
        "O,55.00,5.00,100.00,0.00,42.78,2.78,x",
    ]
    assert np.isclose(r.to_dict()["acc_at_1"]["std"], 5.0)
