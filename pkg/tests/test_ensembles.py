import numpy as np
import pytest

from core.config import MODEL_KINDS, ModelConfig
from core.ensembles import (
    PROB_CLAMP,
    DecisionTree,
    EnsembleModel,
    adaboost_reweight,
    deserialize_model,
    grid_search,
    grow_regression_tree,
    grow_second_order_tree,
    predict,
    predict_proba,
    serialize_model,
    train_adaboost,
    train_cart,
    train_gradient_boost,
    train_model,
    train_random_forest,
    train_regularized_boost,
)
from core.errors import ConfigInvalid, SchemaMismatch, SingleClass
from core.schema import FeatureVector

SMALL = ModelConfig(n_estimators=20, rf_max_depth=6, gb_max_depth=2)


def _fit(kind, X, y, seed=0, **kw):
    return train_model(kind, X, y, SMALL, seed=seed, **kw)


def test_cart_separates_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [0.0], [1.0], [2.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    tree = train_cart(X, y, max_depth=3)
    assert tree.depth() == 1
    assert tree.threshold[0] == pytest.approx(-0.5)
    assert np.array_equal(tree.predict_class(X), y)


def test_cart_single_class_is_one_leaf():
    X = np.arange(6, dtype=float)[:, None]
    tree = train_cart(X, np.zeros(6, dtype=int), max_depth=5)
    assert tree.n_nodes == 1


def test_cart_identical_rows_is_one_leaf():
    X = np.ones((4, 3))
    tree = train_cart(X, np.array([0, 1, 0, 1]), max_depth=5)
    assert tree.n_nodes == 1
    assert tree.value[0].tolist() == [0.5, 0.5]


def test_cart_respects_heavy_weight():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    y = np.array([0, 0, 1, 0])
    w = np.array([0.003, 0.003, 0.99, 0.004])
    tree = train_cart(X, y, max_depth=2, sample_weight=w)
    assert tree.predict_class(X)[2] == 1


def test_cart_tie_breaks_on_lowest_slot():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    tree = train_cart(X, y, max_depth=1)
    assert tree.feature[0] == 0


def test_cart_depth_bound(blobs):
    X, y = blobs
    for depth in (1, 2, 4):
        assert train_cart(X, y, max_depth=depth).depth() <= depth


def test_tree_dict_round_trip(blobs):
    X, y = blobs
    tree = train_cart(X, y, max_depth=3)
    again = DecisionTree.from_dict(tree.to_dict())
    assert np.array_equal(again.predict_value(X), tree.predict_value(X))


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_every_kind_learns_blobs(kind, blobs, blobs_test):
    X, y = blobs
    Xt, yt = blobs_test
    m = _fit(kind, X, y)
    assert (predict(m, Xt) == yt).mean() >= 0.95


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_probabilities_are_distributions(kind, blobs):
    X, y = blobs
    m = _fit(kind, X, y)
    R = np.random.default_rng(1).normal(scale=3.0, size=(1000, X.shape[1]))
    P = predict_proba(m, R)
    assert P.shape == (1000, 2)
    assert np.all(P >= PROB_CLAMP) and np.all(P <= 1 - PROB_CLAMP)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(predict(m, R), np.argmax(P, axis=1))


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_serialization_preserves_predictions(kind, blobs):
    X, y = blobs
    m = _fit(kind, X, y, seed=5)
    text = serialize_model(m)
    again = deserialize_model(text)
    R = np.random.default_rng(2).normal(scale=3.0, size=(1000, X.shape[1]))
    assert np.array_equal(predict_proba(again, R), predict_proba(m, R))
    assert serialize_model(again) == text


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_training_is_seed_deterministic(kind, blobs):
    X, y = blobs
    assert serialize_model(_fit(kind, X, y, seed=3)) == serialize_model(_fit(kind, X, y, seed=3))


def test_row_order_does_not_matter(blobs):
    X, y = blobs
    perm = np.random.default_rng(9).permutation(len(y))
    a = train_random_forest(X, y, 10, seed=4)
    b = train_random_forest(X[perm], y[perm], 10, seed=4)
    assert np.array_equal(predict_proba(a, X), predict_proba(b, X))


def test_single_bootstrap_tree(blobs):
    X, y = blobs
    m = train_random_forest(X, y, n_estimators=1, seed=0)
    assert m.n_estimators == 1


def test_unanimous_forest_is_clamped():
    leaf = DecisionTree(
        feature=np.array([-1]), threshold=np.array([0.0]), left=np.array([-1]),
        right=np.array([-1]), value=np.array([[0.0, 1.0]]), max_depth=0,
    )
    m = EnsembleModel("random_forest", [leaf, leaf], [1.0, 1.0], n_features=2)
    assert predict_proba(m, [0.0, 0.0])[0, 1] == pytest.approx(1 - PROB_CLAMP)


def test_single_class_training_fails():
    X = np.zeros((4, 2))
    for kind in MODEL_KINDS:
        with pytest.raises(SingleClass):
            _fit(kind, X, np.ones(4, dtype=int))


def test_schema_checks(blobs):
    X, y = blobs
    m = _fit("random_forest", X, y)
    with pytest.raises(SchemaMismatch):
        predict_proba(m, np.zeros((1, X.shape[1] + 1)))

    Z = np.random.default_rng(0).normal(size=(40, 89))
    labels = (Z[:, 0] > 0).astype(int)
    tagged = train_random_forest(Z, labels, 3, schema_hash="not-this-schema")
    with pytest.raises(SchemaMismatch):
        predict_proba(tagged, FeatureVector.from_array(np.zeros(89)))


def test_adaboost_reweighting_factor():
    w = np.full(4, 0.25)
    miss = np.array([True, False, False, False])
    new_w, alpha, err = adaboost_reweight(w, miss)
    assert err == pytest.approx(0.25)
    assert alpha == pytest.approx(np.log(3.0))
    assert new_w[0] / new_w[1] == pytest.approx(3.0)
    assert new_w.sum() == pytest.approx(1.0)
    assert np.all(new_w >= 0)


def test_adaboost_stops_after_perfect_round():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    m = train_adaboost(X, np.array([0, 0, 1, 1]), n_estimators=50, base_depth=1)
    assert m.n_estimators == 1


def test_gradient_boost_starts_at_prior_log_odds(blobs):
    X, y = blobs
    m = train_gradient_boost(X, y, n_estimators=5)
    assert y.mean() == 0.5
    assert m.init_score == pytest.approx(0.0)


def test_gradient_boost_loss_is_non_increasing(blobs):
    X, y = blobs
    y = y.copy()
    y[:10] = 1 - y[:10]
    trace = train_gradient_boost(X, y, n_estimators=30, max_depth=2).loss_trace
    assert len(trace) == 30
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_gradient_boost_depth_range(blobs):
    X, y = blobs
    with pytest.raises(ConfigInvalid):
        train_gradient_boost(X, y, n_estimators=1, max_depth=6)


def test_large_lambda_shrinks_leaves(blobs):
    X, y = blobs
    m = train_regularized_boost(X, y, n_estimators=3, reg_lambda=1e12)
    for tree in m.trees:
        assert np.all(np.abs(tree.value) < 1e-6)


def test_second_order_tree_matches_residual_tree():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    residual = np.array([1.0, 0.5, -1.0, -0.5])
    plain = grow_regression_tree(X, residual, max_depth=1)
    second = grow_second_order_tree(X, -residual, np.ones(4), max_depth=1, reg_lambda=0.0, gamma=0.0)
    assert plain.n_leaves == second.n_leaves == 2
    assert np.allclose(plain.predict_value(X), second.predict_value(X))
    assert np.allclose(plain.predict_value(X)[:, 0], [0.75, 0.75, -0.75, -0.75])


def test_gamma_blocks_weak_splits(blobs):
    X, y = blobs
    tree = grow_second_order_tree(X, 0.5 - y, np.full(len(y), 0.25), max_depth=3, gamma=1e9)
    assert tree.n_nodes == 1


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_prefix_equals_smaller_model(kind, blobs):
    X, y = blobs
    big = _fit(kind, X, y, seed=2, n_estimators=12)
    small = _fit(kind, X, y, seed=2, n_estimators=6)
    assert np.array_equal(predict_proba(big.truncated(6), X), predict_proba(small, X))


def test_grid_search_small_grid(blobs):
    X, y = blobs
    result = grid_search(X, y, "gradient_boost", grid=(1, 5, 10), folds=5, seed=1, cfg=SMALL)
    assert [row["n_estimators"] for row in result.table] == [1, 5, 10]
    assert result.best_accuracy == max(row["accuracy"] for row in result.table)
    assert result.model.n_estimators == result.best_n_estimators


def test_grid_search_rejects_fold_count(blobs):
    X, y = blobs
    with pytest.raises(ConfigInvalid):
        grid_search(X, y, "adaboost", grid=(1,), folds=3)


@pytest.mark.slow
def test_grid_search_full_grid(blobs):
    X, y = blobs
    cfg = ModelConfig(gb_max_depth=1, gb_learning_rate=0.1)
    result = grid_search(X, y, "gradient_boost", folds=5, seed=0, cfg=cfg)
    assert len(result.table) == 6
    by_n = {row["n_estimators"]: row["accuracy"] for row in result.table}
    assert by_n[1500] >= by_n[1]
    ties = [row["n_estimators"] for row in result.table if row["accuracy"] == result.best_accuracy]
    assert result.best_n_estimators == min(ties)
