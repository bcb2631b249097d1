import numpy as np
import pytest

from core.dataset import (
    LabeledDataset,
    LabeledRow,
    apply_scaler,
    fit_scaler,
    ingest_csv,
    kfold,
    length_histogram,
    load_features_csv,
    merge_balanced,
    preprocess,
    profile,
    special_char_count,
    split,
    synthesize_corpus,
    write_features_csv,
    write_urls_csv,
)
from core.errors import EmptyFile, InputMissing, InsufficientRows, MissingColumn, NoFeatures, TooFewRows
from core.schema import FEATURE_SCHEMA, MISSING, FeatureVector


def _dataset(n_benign, n_malicious, name="d"):
    rows = [LabeledRow(f"http://b{i}.com/", 0) for i in range(n_benign)]
    rows += [LabeledRow(f"http://m{i}.net/x", 1) for i in range(n_malicious)]
    return LabeledDataset(rows, name=name)


def test_ingest_valid_file(tmp_path):
    p = tmp_path / "urls.csv"
    p.write_text("url,label\nhttp://a.com/,0\nhttp://b.com/x,1\nc.org,0\n")
    d = ingest_csv(str(p))
    assert len(d) == 3
    assert d.skipped == 0
    assert d.labels().tolist() == [0, 1, 0]


def test_ingest_skips_malformed_rows(tmp_path):
    p = tmp_path / "urls.csv"
    p.write_text("url,label\nhttp://a.com/,0\nhttp://b.com/,2\n,1\nhttp://c.com/,1\n")
    d = ingest_csv(str(p))
    assert len(d) == 2
    assert d.skipped == 2


def test_ingest_errors(tmp_path):
    with pytest.raises(InputMissing):
        ingest_csv(str(tmp_path / "missing.csv"))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(EmptyFile):
        ingest_csv(str(empty))
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("link,label\nhttp://a.com,0\n")
    with pytest.raises(MissingColumn):
        ingest_csv(str(wrong))


def test_preprocess_drops_repeated_hosts():
    d = LabeledDataset([
        LabeledRow("http://a.com/one", 0),
        LabeledRow("http://a.com/two", 1),
        LabeledRow("http://b.com/", 0),
    ])
    out = preprocess(d, seed=1)
    assert len(out) == 2
    assert "http://a.com/one" in out.urls()
    assert "http://a.com/two" not in out.urls()


def test_preprocess_is_seed_deterministic():
    d = _dataset(20, 20)
    assert preprocess(d, 7).urls() == preprocess(d, 7).urls()
    assert preprocess(d, 7).urls() != preprocess(d, 8).urls()


@pytest.mark.parametrize("n_benign,n_malicious,expected", [(1000, 400, 400), (1000, 800, 500)])
def test_merge_balanced_counts(n_benign, n_malicious, expected):
    benign = _dataset(n_benign, 0, "benign")
    malicious = _dataset(0, n_malicious, "malicious")
    merged = merge_balanced(benign, malicious, seed=3)
    assert merged.class_counts() == {0: expected, 1: expected}


def test_merge_balanced_needs_both_classes():
    with pytest.raises(InsufficientRows):
        merge_balanced(_dataset(1, 0), _dataset(0, 5), seed=0)


def test_scaler_median_and_iqr():
    X = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
    state = fit_scaler(X)
    assert state.median[0] == pytest.approx(3.0)
    assert state.iqr[0] == pytest.approx(2.0)
    scaled = apply_scaler(state, X)
    assert scaled[2, 0] == pytest.approx(0.0)
    assert scaled[4, 0] == pytest.approx(1.0)


def test_scaler_constant_slot_and_sentinels():
    X = np.array([[7.0, MISSING], [7.0, 1.0], [7.0, 2.0], [7.0, 3.0]])
    state = fit_scaler(X)
    scaled = apply_scaler(state, X)
    assert np.all(scaled[:, 0] == 7.0)
    assert state.median[1] == pytest.approx(2.0)
    # sentinel is scaled on apply even though it was not fitted
    assert scaled[0, 1] == pytest.approx((MISSING - 2.0) / 1.0)


def test_scaler_is_monotone_and_stable():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    state = fit_scaler(X)
    a = apply_scaler(state, X)
    assert np.array_equal(a, apply_scaler(state, X))
    for j in range(3):
        assert np.array_equal(np.argsort(X[:, j]), np.argsort(a[:, j]))


def test_scaler_on_feature_vector():
    X = np.tile(np.arange(len(FEATURE_SCHEMA), dtype=float), (3, 1))
    X[1] += 1
    X[2] += 2
    state = fit_scaler(X)
    v = apply_scaler(state, FeatureVector.from_array(X[2]))
    assert isinstance(v, FeatureVector)
    assert v.values[0] == pytest.approx(1.0)


def test_scaler_needs_two_rows():
    with pytest.raises(NoFeatures):
        fit_scaler(np.zeros((1, 4)))


def test_split_is_stratified():
    d = _dataset(500, 500)
    train, test = split(d, 0.7, seed=5)
    assert len(train) == 700 and len(test) == 300
    assert abs(train.labels().mean() - 0.5) <= 1 / len(train)


def test_split_too_few_rows():
    with pytest.raises(TooFewRows):
        split(_dataset(1, 0), 0.7, seed=0)


def test_kfold_partitions_rows():
    d = _dataset(23, 27)
    folds = kfold(d, 5, seed=2)
    assert len(folds) == 5
    joined = np.sort(np.concatenate(folds))
    assert joined.tolist() == list(range(len(d)))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = kfold(d, 5, seed=2)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


def test_synthesize_corpus_shape_and_determinism():
    d = synthesize_corpus(500, seed=11)
    assert len(d) == 1000
    assert d.class_counts() == {0: 500, 1: 500}
    assert d.urls() == synthesize_corpus(500, seed=11).urls()
    assert len({u for u in d.urls()}) == 1000


def test_synthesize_corpus_minimum():
    with pytest.raises(TooFewRows):
        synthesize_corpus(5, seed=0)


def test_profile_matches_target_statistics():
    report = profile(synthesize_corpus(2000, seed=4))
    benign = report["classes"]["benign"]
    malicious = report["classes"]["malicious"]
    assert benign["mean_length"] == pytest.approx(44.28, abs=2.0)
    assert malicious["mean_length"] == pytest.approx(63.14, abs=2.0)
    assert malicious["mean_special_chars"] == pytest.approx(13.98, abs=1.0)
    assert malicious["mean_path_length"] == pytest.approx(42.60, abs=2.0)
    assert malicious["ip_host_fraction"] <= 0.02 + 0.01


def test_profile_empty_paths():
    d = LabeledDataset([LabeledRow("http://a.com", 0), LabeledRow("b.org", 0)])
    report = profile(d)
    assert report["classes"]["benign"]["mean_path_length"] == 0
    assert report["classes"]["malicious"]["count"] == 0


def test_length_histogram():
    assert length_histogram([1, 12, 15, 31], bucket_width=10) == [
        (0, 10, 1), (10, 20, 2), (20, 30, 0), (30, 40, 1),
    ]


def test_special_char_count():
    assert special_char_count("http://a.com/x-y") == 6


def test_featurized_csv_round_trip(tmp_path, featurized_small):
    path = tmp_path / "features.csv"
    write_features_csv(featurized_small, str(path))
    loaded = load_features_csv(str(path))
    assert loaded.urls() == featurized_small.urls()
    assert loaded.records() == featurized_small.records()


def test_urls_csv_quotes_commas_and_reloads(tmp_path):
    d = LabeledDataset(
        rows=[
            LabeledRow("http://a.example.com/p?x=1,2", 1),
            LabeledRow("https://www.example.org/", 0),
        ]
    )
    path = tmp_path / "urls.csv"
    write_urls_csv(d, str(path))
    assert path.read_text(encoding="utf-8") == (
        'url,label\n"http://a.example.com/p?x=1,2",1\nhttps://www.example.org/,0\n'
    )
    back = ingest_csv(str(path))
    assert back.urls() == d.urls()
    assert back.labels().tolist() == [1, 0]
