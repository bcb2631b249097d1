import json

import pandas as pd
import pytest

from core.config import MODEL_KINDS
from core.evalx import REPORT_COLUMNS
from main import EXIT_DETECTOR_ERROR, main
from services.run_service import RESOLVED_CONFIG, RUN_MANIFEST

SMALL_RUN = {
    "folds": 5,
    "models": {"n_estimators": 5, "rf_max_depth": 4, "gb_max_depth": 2, "grid": [1, 3, 5]},
    "attack": {"budget": 20, "max_samples": 6, "confidences": [0]},
    "cluster": {"restarts": 2, "max_iter": 50},
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> extract -> train on a small corpus, replay mode with an empty fixture store."""
    root = tmp_path_factory.mktemp("pipeline")
    config = root / "config.json"
    config.write_text(json.dumps(SMALL_RUN))
    fixtures = root / "fixtures"
    fixtures.mkdir()
    common = ["--config", str(config), "--seed", "3", "--providers", "replay", "--fixtures", str(fixtures)]

    assert main(["synth", "--n-per-class", "30", "--out", str(root / "synth"), *common]) == 0
    urls = root / "synth" / "urls.csv"
    assert main(["extract", "--input", str(urls), "--out", str(root / "extract"), *common]) == 0
    features = root / "extract" / "features.csv"
    assert main(["train", "--input", str(features), "--out", str(root / "train"), *common]) == 0
    return {"root": root, "common": common, "urls": urls, "features": features}


def test_every_command_writes_snapshot_and_manifest(pipeline):
    for step in ("synth", "extract", "train"):
        out = pipeline["root"] / step
        assert (out / RESOLVED_CONFIG).exists()
        manifest = json.loads((out / RUN_MANIFEST).read_text())
        assert manifest["command"] == step
        assert manifest["seed"] == 3
        for name in manifest["outputs"]:
            assert (out / name).exists()


def test_synth_and_extract_outputs(pipeline):
    urls = pd.read_csv(pipeline["urls"])
    assert list(urls.columns) == ["url", "label"]
    assert urls["label"].value_counts().to_dict() == {0: 30, 1: 30}
    features = pd.read_csv(pipeline["features"], keep_default_na=False)
    assert len(features.columns) == 2 + 89
    assert (features["GoogleSearchFeature"] == -1).all()


def test_train_writes_models_and_holdout_report(pipeline):
    out = pipeline["root"] / "train"
    for kind in MODEL_KINDS:
        assert (out / f"model_{kind}.json").exists()
    assert (out / "preprocessing.json").exists()
    report = pd.read_csv(out / "holdout_report.csv")
    assert list(report.columns) == REPORT_COLUMNS
    assert len(report) == len(MODEL_KINDS)
    assert (report["Folds"] == "holdout").all()


def test_rerun_is_byte_identical(pipeline, tmp_path):
    common = pipeline["common"]
    assert main(["extract", "--input", str(pipeline["urls"]), "--out", str(tmp_path / "e"), *common]) == 0
    assert (tmp_path / "e" / "features.csv").read_bytes() == pipeline["features"].read_bytes()
    assert main(["train", "--input", str(pipeline["features"]), "--out", str(tmp_path / "t"), *common]) == 0
    original = pipeline["root"] / "train"
    for name in ("holdout_report.csv", "preprocessing.json", "model_adaboost.json"):
        assert (tmp_path / "t" / name).read_bytes() == (original / name).read_bytes()


def test_eval_matched(pipeline, tmp_path):
    args = ["eval-matched", "--input", str(pipeline["features"]), "--kinds", "random_forest", "adaboost",
            "--out", str(tmp_path), *pipeline["common"]]
    assert main(args) == 0
    report = pd.read_csv(tmp_path / "matched_report.csv")
    assert report["Model"].tolist() == ["random_forest", "adaboost"]
    assert (report["Folds"] == 5).all()


def test_eval_mismatched(pipeline, tmp_path):
    common = pipeline["common"]
    assert main(["synth", "--n-per-class", "15", "--datasets", "3", "--out", str(tmp_path / "s"), *common]) == 0
    inputs = [str(tmp_path / "s" / f"urls_{i}.csv") for i in (1, 2, 3)]
    assert main(["extract", "--input", *inputs, "--out", str(tmp_path / "e"), *common]) == 0
    features = [str(tmp_path / "e" / f"features_urls_{i}.csv") for i in (1, 2, 3)]
    args = ["eval-mismatched", "--input", *features, "--kinds", "gradient_boost", "--out", str(tmp_path / "m"), *common]
    assert main(args) == 0
    report = pd.read_csv(tmp_path / "m" / "mismatched_report.csv")
    assert len(report) == 6
    assert (report["Dataset"] != report["TestedOn"]).all()
    assert (report["Folds"] == "cross").all()


def test_grid_search(pipeline, tmp_path):
    args = ["grid-search", "--input", str(pipeline["features"]), "--kinds", "gradient_boost",
            "--out", str(tmp_path), *pipeline["common"]]
    assert main(args) == 0
    grid = pd.read_csv(tmp_path / "grid_search.csv")
    assert grid["NEstimators"].tolist() == [1, 3, 5]
    assert grid["Selected"].sum() == 1


def test_cluster(pipeline, tmp_path):
    assert main(["cluster", "--input", str(pipeline["features"]), "--out", str(tmp_path), *pipeline["common"]]) == 0
    curve = pd.read_csv(tmp_path / "elbow.csv")
    assert curve["k"].tolist() == list(range(1, 10))
    summary = json.loads((tmp_path / "cluster_summary.json").read_text())
    assert sum(c["size"] for c in summary["clusters"]) == 60
    assert len(pd.read_csv(tmp_path / "projection.csv")) == 60


def test_attack(pipeline, tmp_path):
    args = ["attack", "--input", str(pipeline["features"]), "--models", str(pipeline["root"] / "train"),
            "--kinds", "regularized_boost", "--solver", "newton", "--out", str(tmp_path), *pipeline["common"]]
    assert main(args) == 0
    report = pd.read_csv(tmp_path / "attack_report.csv")
    assert len(report) == 1
    row = report.iloc[0]
    assert row["Solver"] == "newton"
    assert row["AttackAccuracyRate"] <= row["CleanAccuracy"] + 1e-9
    lines = (tmp_path / "attack_samples.jsonl").read_text().splitlines()
    assert len(lines) == row["Attacked"]


def test_profile(pipeline, tmp_path):
    assert main(["profile", "--input", str(pipeline["urls"]), "--out", str(tmp_path), *pipeline["common"]]) == 0
    stats = json.loads((tmp_path / "profile.json").read_text())
    assert stats["classes"]["benign"]["count"] == 30
    hist = pd.read_csv(tmp_path / "histogram_malicious.csv")
    assert list(hist.columns) == ["lo", "hi", "count"]
    assert hist["count"].sum() == 30


def test_merge(pipeline, tmp_path):
    assert main(["merge", "--benign", str(pipeline["urls"]), "--malicious", str(pipeline["urls"]),
                 "--out", str(tmp_path), *pipeline["common"]]) == 0
    merged = pd.read_csv(tmp_path / "merged.csv")
    assert merged["label"].value_counts().to_dict() == {0: 15, 1: 15}


def test_predict(pipeline, tmp_path):
    args = ["predict", "--input", str(pipeline["urls"]), "--models", str(pipeline["root"] / "train"),
            "--kind", "random_forest", "--out", str(tmp_path), *pipeline["common"]]
    assert main(args) == 0
    predictions = pd.read_csv(tmp_path / "predictions.csv")
    assert list(predictions.columns) == ["url", "prediction", "p_malicious"]
    assert len(predictions) == 60
    assert predictions["p_malicious"].between(0, 1).all()


def test_missing_input_is_a_machine_readable_error(tmp_path, capsys):
    code = main(["train", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == EXIT_DETECTOR_ERROR
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "InputMissing"


def test_replay_without_fixture_store_is_rejected(pipeline, tmp_path, capsys):
    args = ["extract", "--input", str(pipeline["urls"]), "--providers", "replay",
            "--fixtures", str(tmp_path / "absent"), "--out", str(tmp_path)]
    assert main(args) == EXIT_DETECTOR_ERROR
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigInvalid"


def test_init_db():
    assert main(["init-db"]) == 0
