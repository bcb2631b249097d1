import json

import numpy as np
import pandas as pd
import pytest

from core.config import MODEL_KINDS, ModelConfig
from core.errors import EmptyMatrix, TooFewRows
from core.evalx import (
    REPORT_COLUMNS,
    ConfusionMatrix,
    eval_holdout,
    eval_matched,
    eval_mismatched,
    metrics,
    write_reports,
)

FAST = ModelConfig(n_estimators=10, rf_max_depth=5, gb_max_depth=2)


def test_metrics_arithmetic():
    m = metrics(ConfusionMatrix(tp=99, tn=98, fp=1, fn=2))
    assert m.accuracy == pytest.approx(98.5)
    assert m.precision == pytest.approx(99.0)
    assert m.fpr == pytest.approx(1 / 99)
    assert m.fnr == pytest.approx(2 / 101)


def test_undefined_rates_are_absent():
    m = metrics(ConfusionMatrix(tp=5, tn=0, fp=0, fn=1))
    assert m.fpr is None
    assert metrics(ConfusionMatrix(tn=3, fn=2)).precision is None


def test_perfect_classifier():
    m = metrics(ConfusionMatrix(tp=10, tn=10))
    assert (m.accuracy, m.fpr, m.fnr) == (100.0, 0.0, 0.0)


def test_empty_matrix():
    with pytest.raises(EmptyMatrix):
        metrics(ConfusionMatrix())


def test_rate_complements():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 2, 300)
    p = rng.integers(0, 2, 300)
    cm = ConfusionMatrix.from_predictions(t, p)
    m = metrics(cm)
    specificity = cm.tn / (cm.tn + cm.fp)
    recall = cm.tp / (cm.tp + cm.fn)
    assert m.fpr + specificity == pytest.approx(1.0)
    assert m.fnr + recall == pytest.approx(1.0)
    assert cm.total == 300


def _recount(y, pred):
    tp = sum(1 for a, b in zip(y, pred) if a == 1 and b == 1)
    tn = sum(1 for a, b in zip(y, pred) if a == 0 and b == 0)
    fp = sum(1 for a, b in zip(y, pred) if a == 0 and b == 1)
    fn = sum(1 for a, b in zip(y, pred) if a == 1 and b == 0)
    return ConfusionMatrix(tp, tn, fp, fn)


def test_matched_pools_every_row(featurized_small):
    report = eval_matched(featurized_small, "random_forest", folds=5, seed=1, cfg=FAST)
    assert report.folds == 5
    assert report.confusion.total == len(featurized_small)
    assert report.confusion == _recount(featurized_small.labels(), report.predictions)
    assert report.accuracy == metrics(report.confusion).accuracy


def test_matched_is_deterministic(featurized_small):
    a = eval_matched(featurized_small, "gradient_boost", folds=5, seed=3, cfg=FAST)
    b = eval_matched(featurized_small, "gradient_boost", folds=5, seed=3, cfg=FAST)
    assert a == b
    assert np.array_equal(a.predictions, b.predictions)


def test_mismatched_grid_shape(featurized_small):
    parts = [featurized_small.subset(range(i, len(featurized_small), 3), f"part{i}") for i in range(3)]
    reports = eval_mismatched(parts, "adaboost", seed=0, cfg=FAST)
    assert len(reports) == 6
    assert all(r.trained_on != r.tested_on for r in reports)
    assert {r.to_row()["Folds"] for r in reports} == {"cross"}
    assert reports[0].to_dict()["protocol"] == "cross"
    assert len(eval_mismatched(parts[:2], "adaboost", seed=0, cfg=FAST)) == 2


def test_mismatched_needs_two_datasets(featurized_small):
    with pytest.raises(TooFewRows):
        eval_mismatched([featurized_small], "adaboost")


def test_holdout_report(featurized_small):
    half = len(featurized_small) // 2
    train = featurized_small.subset(range(half), "train")
    test = featurized_small.subset(range(half, len(featurized_small)), "test")
    report = eval_holdout(train, test, "regularized_boost", seed=0, cfg=FAST)
    assert report.to_row()["Folds"] == "holdout"
    assert report.confusion == _recount(test.labels(), report.predictions)


def test_write_reports(tmp_path, featurized_small):
    report = eval_matched(featurized_small, "adaboost", folds=5, seed=0, cfg=FAST)
    write_reports([report], str(tmp_path / "r.csv"), str(tmp_path / "r.json"))
    frame = pd.read_csv(tmp_path / "r.csv")
    assert list(frame.columns) == REPORT_COLUMNS
    payload = json.loads((tmp_path / "r.json").read_text())
    assert payload[0]["confusion"]["tp"] == report.confusion.tp


@pytest.mark.slow
@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_matched_accuracy_on_synthetic_corpus(kind, featurized_corpus):
    report = eval_matched(featurized_corpus, kind, folds=10, seed=0)
    assert report.accuracy >= 95.0
    assert report.confusion == _recount(featurized_corpus.labels(), report.predictions)


@pytest.mark.slow
def test_mismatched_six_datasets(featurized_corpus):
    parts = [featurized_corpus.subset(range(i, len(featurized_corpus), 6), f"d{i}") for i in range(6)]
    for kind in MODEL_KINDS:
        assert len(eval_mismatched(parts, kind, seed=0, cfg=FAST)) == 30
