"""
Tree ensembles built from scratch on numpy.

- CART trees (weighted Gini for classification, squared error for residual
  fitting, second-order gain for regularized boosting)
- random forest, AdaBoost (SAMME, binary), gradient boosting and
  regularized second-order boosting
- predict_proba / predict, JSON (de)serialization, grid search

Trees are stored as flat node arrays. Internal nodes route ``x[feature] <=
threshold`` to the left child. Leaf nodes have ``feature == -1``.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.config import MODEL_KINDS, ModelConfig
from core.errors import ConfigInvalid, SchemaMismatch, SingleClass, TooFewRows
from core.logger import get_logger
from core.schema import FeatureVector

logger = get_logger("ensembles")

PROB_CLAMP = 1e-6
MODEL_FORMAT = 1
TIE_TOLERANCE = 1e-12

FeatureRule = Union[None, str, int, float]


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        for _ in range(self.max_depth + 1):
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            x = X[rows, np.where(internal, feat, 0)]
            nxt = np.where(x <= self.threshold[idx], self.left[idx], self.right[idx])
            idx = np.where(internal, nxt, idx)
        return idx

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_value(X), axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=int),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=int),
            right=np.asarray(data["right"], dtype=int),
            value=np.asarray(data["value"], dtype=float).reshape(len(data["feature"]), -1),
            max_depth=int(data["max_depth"]),
        )


def _n_subset(rule: FeatureRule, p: int) -> int:
    if rule is None or rule == "all":
        return p
    if rule == "sqrt":
        return max(1, int(math.sqrt(p)))
    if rule == "log2":
        return max(1, int(math.log2(p))) if p > 1 else 1
    if isinstance(rule, float) and 0.0 < rule <= 1.0:
        return max(1, int(rule * p))
    if isinstance(rule, int) and rule >= 1:
        return min(p, rule)
    raise ConfigInvalid(f"unknown feature subset rule {rule!r}")


class _TreeGrower:
    """
    Greedy depth-first tree growth over additive per-row statistics.

    ``score(sums)`` maps summed statistics of a node to its quality (higher is
    better); split gain is score(left) + score(right) - score(parent).
    """

    def __init__(
        self,
        X: np.ndarray,
        stats: np.ndarray,
        score: Callable[[np.ndarray], np.ndarray],
        leaf_value: Callable[[np.ndarray], np.ndarray],
        max_depth: int,
        min_leaf: int,
        max_features: FeatureRule = None,
        rng: Optional[np.random.Generator] = None,
        min_gain: float = TIE_TOLERANCE,
        gain_scale: float = 1.0,
    ):
        if max_depth < 0:
            raise ConfigInvalid("max_depth must be >= 0")
        if min_leaf < 1:
            raise ConfigInvalid("min_leaf must be >= 1")
        self.X = X
        self.stats = stats
        self.score = score
        self.leaf_value = leaf_value
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_sub = _n_subset(max_features, X.shape[1])
        self.rng = rng or np.random.default_rng(0)
        self.min_gain = min_gain
        self.gain_scale = gain_scale
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[np.ndarray] = []

    def grow(self) -> DecisionTree:
        self._node(np.arange(self.X.shape[0]), 0)
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=int),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=int),
            right=np.asarray(self.right, dtype=int),
            value=np.vstack(self.value),
            max_depth=self.max_depth,
        )

    def _features(self) -> np.ndarray:
        p = self.X.shape[1]
        if self.n_sub >= p:
            return np.arange(p)
        return np.sort(self.rng.choice(p, size=self.n_sub, replace=False))

    def _best_split(self, idx: np.ndarray) -> Optional[Tuple[int, float]]:
        n = idx.size
        features = self._features()
        Xn = self.X[np.ix_(idx, features)]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        S = self.stats[idx][order]
        left = np.cumsum(S, axis=0)[:-1]
        total = S[:, 0, :].sum(axis=0)
        right = total - left

        count_left = np.arange(1, n)[:, None]
        valid = (xs[1:] > xs[:-1]) & (count_left >= self.min_leaf) & (n - count_left >= self.min_leaf)
        if not valid.any():
            return None
        gain = self.gain_scale * (self.score(left) + self.score(right) - self.score(total[None, None, :]))
        gain = np.where(valid, gain, -np.inf)

        # (feature, position) order: lowest slot first, then lowest threshold
        flat = gain.T.ravel()
        best = flat.max()
        if not np.isfinite(best) or best <= self.min_gain:
            return None
        pick = int(np.flatnonzero(flat >= best - TIE_TOLERANCE)[0])
        fi, pos = divmod(pick, n - 1)
        lo, hi = xs[pos, fi], xs[pos + 1, fi]
        thr = (lo + hi) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return int(features[fi]), float(thr)

    def _node(self, idx: np.ndarray, depth: int) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(self.leaf_value(self.stats[idx].sum(axis=0)))

        if depth >= self.max_depth or idx.size < 2 * self.min_leaf:
            return node
        split = self._best_split(idx)
        if split is None:
            return node
        feat, thr = split
        go_left = self.X[idx, feat] <= thr
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self._node(idx[go_left], depth + 1)
        self.right[node] = self._node(idx[~go_left], depth + 1)
        return node


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _gini_score(sums: np.ndarray) -> np.ndarray:
    w = sums.sum(axis=-1)
    return _safe_div((sums ** 2).sum(axis=-1), w)


def _class_distribution(sums: np.ndarray) -> np.ndarray:
    w = sums.sum()
    return sums / w if w > 0 else np.full(sums.shape, 1.0 / sums.size)


def _squared_error_score(sums: np.ndarray) -> np.ndarray:
    return _safe_div(sums[..., 1] ** 2, sums[..., 0])


def _mean_leaf(sums: np.ndarray) -> np.ndarray:
    return np.array([sums[1] / sums[0] if sums[0] > 0 else 0.0])


def train_cart(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_leaf: int = 1,
    max_features: FeatureRule = None,
    sample_weight: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> DecisionTree:
    """Classification tree on weighted Gini impurity. Leaves hold class distributions."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.shape[0] < 2:
        raise TooFewRows("a tree needs at least 2 rows")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("sample weights must be >= 0 and not all zero")
    stats = np.column_stack([w * (y == 0), w * (y == 1)])
    return _TreeGrower(
        X, stats, _gini_score, _class_distribution, max_depth, min_leaf, max_features, rng
    ).grow()


def grow_regression_tree(
    X: np.ndarray,
    target: np.ndarray,
    max_depth: int,
    min_leaf: int = 1,
    sample_weight: Optional[np.ndarray] = None,
) -> DecisionTree:
    """Squared-error regression tree; leaves hold the weighted mean target."""
    X = np.asarray(X, dtype=float)
    w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    stats = np.column_stack([w, w * np.asarray(target, dtype=float)])
    return _TreeGrower(X, stats, _squared_error_score, _mean_leaf, max_depth, min_leaf).grow()


def grow_second_order_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    max_depth: int,
    min_leaf: int = 1,
    reg_lambda: float = 1.0,
    gamma: float = 0.0,
) -> DecisionTree:
    """
    Tree on gradient / hessian sums.

    Leaf weight is -G / (H + lambda); a split is kept only when
    1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] exceeds gamma.
    """
    if reg_lambda < 0 or gamma < 0:
        raise ConfigInvalid("lambda and gamma must be >= 0")

    def score(sums: np.ndarray) -> np.ndarray:
        return _safe_div(sums[..., 0] ** 2, sums[..., 1] + reg_lambda)

    def leaf(sums: np.ndarray) -> np.ndarray:
        den = sums[1] + reg_lambda
        return np.array([-sums[0] / den if den > 0 else 0.0])

    stats = np.column_stack([np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)])
    return _TreeGrower(
        np.asarray(X, dtype=float), stats, score, leaf, max_depth, min_leaf,
        min_gain=max(gamma, TIE_TOLERANCE), gain_scale=0.5,
    ).grow()


# ---------------------------------------------------------------------------
# Ensemble model
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


@dataclass
class EnsembleModel:
    """Trained ensemble exposing a two-class probability oracle."""

    kind: str
    trees: List[DecisionTree]
    weights: List[float]
    n_features: int
    learning_rate: float = 1.0
    init_score: float = 0.0
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    schema_hash: Optional[str] = None
    loss_trace: List[float] = field(default_factory=list, compare=False, repr=False)
    _packed: Optional[Tuple[np.ndarray, ...]] = field(default=None, init=False, compare=False, repr=False)

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    def _tree_outputs(self, tree: DecisionTree, weight: float) -> np.ndarray:
        """Per-node contribution of one tree to the ensemble score."""
        if self.kind == "random_forest":
            return tree.value[:, 1]
        if self.kind == "adaboost":
            return weight * np.where(tree.value[:, 1] > tree.value[:, 0], 1.0, -1.0)
        return self.learning_rate * tree.value[:, 0]

    def _pack(self) -> Tuple[np.ndarray, ...]:
        if self._packed is None:
            t = len(self.trees)
            width = max(tree.n_nodes for tree in self.trees)
            feature = np.full((t, width), -1, dtype=int)
            threshold = np.zeros((t, width))
            left = np.zeros((t, width), dtype=int)
            right = np.zeros((t, width), dtype=int)
            out = np.zeros((t, width))
            for i, (tree, w) in enumerate(zip(self.trees, self.weights)):
                n = tree.n_nodes
                feature[i, :n] = tree.feature
                threshold[i, :n] = tree.threshold
                left[i, :n] = tree.left
                right[i, :n] = tree.right
                out[i, :n] = self._tree_outputs(tree, w)
            depth = max(tree.max_depth for tree in self.trees)
            self._packed = (feature, threshold, left, right, out, depth)
        return self._packed

    def staged_outputs(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_rows) per-tree contributions, all trees traversed at once."""
        feature, threshold, left, right, out, depth = self._pack()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t, m = len(self.trees), X.shape[0]
        tr = np.arange(t)[:, None]
        rows = np.arange(m)[None, :]
        idx = np.zeros((t, m), dtype=int)
        for _ in range(depth + 1):
            feat = feature[tr, idx]
            internal = feat >= 0
            if not internal.any():
                break
            x = X[rows, np.where(internal, feat, 0)]
            nxt = np.where(x <= threshold[tr, idx], left[tr, idx], right[tr, idx])
            idx = np.where(internal, nxt, idx)
        return out[tr, idx]

    def combine(self, summed: np.ndarray, n_trees: int) -> np.ndarray:
        """Malicious-class probability from summed tree contributions."""
        if self.kind == "random_forest":
            p1 = summed / n_trees
        elif self.kind == "adaboost":
            p1 = _sigmoid(2.0 * summed)
        else:
            p1 = _sigmoid(self.init_score + summed)
        return np.clip(p1, PROB_CLAMP, 1.0 - PROB_CLAMP)

    def truncated(self, n: int) -> "EnsembleModel":
        """The same model restricted to its first n trees."""
        n = max(1, min(n, len(self.trees)))
        return EnsembleModel(
            kind=self.kind,
            trees=self.trees[:n],
            weights=self.weights[:n],
            n_features=self.n_features,
            learning_rate=self.learning_rate,
            init_score=self.init_score,
            params={**self.params, "n_estimators": n},
            seed=self.seed,
            schema_hash=self.schema_hash,
            loss_trace=self.loss_trace[:n],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "n_estimators": self.n_estimators,
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "init_score": self.init_score,
            "params": self.params,
            "seed": self.seed,
            "schema_hash": self.schema_hash,
            "trees": [{**t.to_dict(), "weight": float(w)} for t, w in zip(self.trees, self.weights)],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnsembleModel":
        if data.get("format") != MODEL_FORMAT:
            raise SchemaMismatch(f"unsupported model format {data.get('format')!r}")
        if data.get("kind") not in MODEL_KINDS:
            raise SchemaMismatch(f"unknown model kind {data.get('kind')!r}")
        return cls(
            kind=data["kind"],
            trees=[DecisionTree.from_dict(t) for t in data["trees"]],
            weights=[float(t["weight"]) for t in data["trees"]],
            n_features=int(data["n_features"]),
            learning_rate=float(data["learning_rate"]),
            init_score=float(data["init_score"]),
            params=dict(data.get("params", {})),
            seed=int(data.get("seed", 0)),
            schema_hash=data.get("schema_hash"),
        )


def serialize_model(m: EnsembleModel) -> str:
    return json.dumps(m.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def deserialize_model(text: str) -> EnsembleModel:
    return EnsembleModel.from_dict(json.loads(text))


def save_model(m: EnsembleModel, path: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(serialize_model(m), encoding="utf-8")
    logger.info("Saved %s model (%d trees) to %s", m.kind, m.n_estimators, p)


def load_model(path: str) -> EnsembleModel:
    return deserialize_model(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _as_matrix(m: EnsembleModel, v: Union[FeatureVector, np.ndarray, Sequence[float]]) -> np.ndarray:
    if isinstance(v, FeatureVector):
        if m.schema_hash is not None and v.schema_hash != m.schema_hash:
            raise SchemaMismatch("feature vector schema differs from the model's")
        X = v.as_array()[None, :]
    else:
        X = np.atleast_2d(np.asarray(v, dtype=float))
    if X.shape[1] != m.n_features:
        raise SchemaMismatch(f"model expects {m.n_features} slots, got {X.shape[1]}")
    return X


def predict_proba(m: EnsembleModel, v) -> np.ndarray:
    """
    Per-class probabilities, shape (n_rows, 2), columns (benign, malicious).

    Accepts a FeatureVector, one row or a matrix. Values are clamped to
    [1e-6, 1 - 1e-6] and each row sums to 1.
    """
    X = _as_matrix(m, v)
    p1 = m.combine(m.staged_outputs(X).sum(axis=0), m.n_estimators)
    return np.column_stack([1.0 - p1, p1])


def predict(m: EnsembleModel, v) -> np.ndarray:
    return np.argmax(predict_proba(m, v), axis=1)


def staged_accuracy(m: EnsembleModel, X: np.ndarray, y: np.ndarray, sizes: Sequence[int]) -> Dict[int, float]:
    """Accuracy of the first-n-trees sub-ensemble for each n, from one traversal."""
    X = _as_matrix(m, X)
    cum = np.cumsum(m.staged_outputs(X), axis=0)
    y = np.asarray(y)
    result = {}
    for n in sizes:
        k = max(1, min(n, m.n_estimators))
        p1 = m.combine(cum[k - 1], k)
        result[n] = float(((p1 > 0.5).astype(int) == y).mean())
    return result


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _prepare(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Validate and put rows in canonical (lexicographic) order."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if X.shape[0] < 2:
        raise TooFewRows("need at least 2 training rows")
    if set(np.unique(y)) != {0, 1}:
        raise SingleClass("training data must contain both classes")
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    return X[order], y[order]


def _prior_log_odds(y: np.ndarray) -> float:
    p = float(y.mean())
    return math.log(p / (1.0 - p))


def train_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    max_depth: int = 10,
    max_features: FeatureRule = "sqrt",
    seed: int = 0,
    min_leaf: int = 1,
    schema_hash: Optional[str] = None,
) -> EnsembleModel:
    """Bootstrap trees with per-split feature subsampling; probability is the mean leaf distribution."""
    X, y = _prepare(X, y)
    n = X.shape[0]
    trees = []
    for i in range(n_estimators):
        rng = np.random.default_rng([seed, i])
        boot = rng.integers(0, n, size=n)
        if np.unique(y[boot]).size < 2:
            boot = np.concatenate([boot, np.flatnonzero(y != y[boot[0]])[:1]])
        trees.append(train_cart(X[boot], y[boot], max_depth, min_leaf, max_features, rng=rng))
    logger.debug("Random forest: %d trees", len(trees))
    return EnsembleModel(
        kind="random_forest",
        trees=trees,
        weights=[1.0] * len(trees),
        n_features=X.shape[1],
        params={"n_estimators": n_estimators, "max_depth": max_depth, "max_features": max_features, "min_leaf": min_leaf},
        seed=seed,
        schema_hash=schema_hash,
    )


def adaboost_reweight(w: np.ndarray, miss: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """
    One SAMME round for two classes.

    Returns (renormalized weights, tree weight alpha, weighted error).
    Misclassified rows are multiplied by (1 - e) / e before renormalization.
    """
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    err = float(w[miss].sum())
    e = min(max(err, 1e-10), 1 - 1e-10)
    alpha = math.log((1.0 - e) / e)
    new_w = w * np.where(miss, (1.0 - e) / e, 1.0)
    return new_w / new_w.sum(), alpha, err


def train_adaboost(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    base_depth: int = 2,
    seed: int = 0,
    min_leaf: int = 1,
    schema_hash: Optional[str] = None,
) -> EnsembleModel:
    """
    Sequential weighted trees. Stops early when a round's weighted error
    reaches 0.5 (the round is dropped unless it is the first) or 0 (kept).
    """
    X, y = _prepare(X, y)
    rng = np.random.default_rng(seed)
    w = np.full(X.shape[0], 1.0 / X.shape[0])
    trees: List[DecisionTree] = []
    alphas: List[float] = []
    for _ in range(n_estimators):
        tree = train_cart(X, y, base_depth, min_leaf, None, w, rng)
        miss = tree.predict_class(X) != y
        new_w, alpha, err = adaboost_reweight(w, miss)
        if err >= 0.5:
            if not trees:
                trees.append(tree)
                alphas.append(1.0)
            break
        trees.append(tree)
        alphas.append(alpha)
        if err == 0.0:
            break
        w = new_w
    logger.debug("AdaBoost: %d rounds", len(trees))
    return EnsembleModel(
        kind="adaboost",
        trees=trees,
        weights=alphas,
        n_features=X.shape[1],
        params={"n_estimators": n_estimators, "base_depth": base_depth, "min_leaf": min_leaf},
        seed=seed,
        schema_hash=schema_hash,
    )


def train_gradient_boost(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
    min_leaf: int = 1,
    schema_hash: Optional[str] = None,
) -> EnsembleModel:
    """Regression trees on the logistic-loss residual y - p, added in log-odds space."""
    if not 1 <= max_depth <= 5:
        raise ConfigInvalid("gradient boost max_depth must lie in [1, 5]")
    X, y = _prepare(X, y)
    init = _prior_log_odds(y)
    F = np.full(X.shape[0], init)
    trees, trace = [], []
    for _ in range(n_estimators):
        residual = y - _sigmoid(F)
        tree = grow_regression_tree(X, residual, max_depth, min_leaf)
        F = F + learning_rate * tree.predict_value(X)[:, 0]
        trees.append(tree)
        trace.append(log_loss(y, _sigmoid(F)))
    return EnsembleModel(
        kind="gradient_boost",
        trees=trees,
        weights=[1.0] * len(trees),
        n_features=X.shape[1],
        learning_rate=learning_rate,
        init_score=init,
        params={"n_estimators": n_estimators, "max_depth": max_depth, "min_leaf": min_leaf},
        seed=seed,
        schema_hash=schema_hash,
        loss_trace=trace,
    )


def train_regularized_boost(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    reg_lambda: float = 1.0,
    gamma: float = 0.0,
    seed: int = 0,
    min_leaf: int = 1,
    schema_hash: Optional[str] = None,
) -> EnsembleModel:
    """Second-order boosting on logistic loss with L2 leaf penalty lambda and split penalty gamma."""
    X, y = _prepare(X, y)
    init = _prior_log_odds(y)
    F = np.full(X.shape[0], init)
    trees, trace = [], []
    for _ in range(n_estimators):
        p = _sigmoid(F)
        tree = grow_second_order_tree(X, p - y, p * (1.0 - p), max_depth, min_leaf, reg_lambda, gamma)
        F = F + learning_rate * tree.predict_value(X)[:, 0]
        trees.append(tree)
        trace.append(log_loss(y, _sigmoid(F)))
    return EnsembleModel(
        kind="regularized_boost",
        trees=trees,
        weights=[1.0] * len(trees),
        n_features=X.shape[1],
        learning_rate=learning_rate,
        init_score=init,
        params={
            "n_estimators": n_estimators,
            "max_depth": max_depth,
            "reg_lambda": reg_lambda,
            "gamma": gamma,
            "min_leaf": min_leaf,
        },
        seed=seed,
        schema_hash=schema_hash,
        loss_trace=trace,
    )


def train_model(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    cfg: Optional[ModelConfig] = None,
    seed: int = 0,
    n_estimators: Optional[int] = None,
    schema_hash: Optional[str] = None,
) -> EnsembleModel:
    """Dispatch on kind with hyperparameters from a ModelConfig."""
    cfg = cfg or ModelConfig()
    n = n_estimators if n_estimators is not None else cfg.n_estimators
    if kind == "random_forest":
        m = train_random_forest(X, y, n, cfg.rf_max_depth, cfg.rf_max_features, seed, cfg.min_leaf, schema_hash)
    elif kind == "adaboost":
        m = train_adaboost(X, y, n, cfg.ada_base_depth, seed, cfg.min_leaf, schema_hash)
    elif kind == "gradient_boost":
        m = train_gradient_boost(X, y, n, cfg.gb_learning_rate, cfg.gb_max_depth, seed, cfg.min_leaf, schema_hash)
    elif kind == "regularized_boost":
        m = train_regularized_boost(
            X, y, n, cfg.gb_learning_rate, cfg.gb_max_depth, cfg.reg_lambda, cfg.reg_gamma, seed, cfg.min_leaf, schema_hash
        )
    else:
        raise ConfigInvalid(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    logger.info("Trained %s: %d trees on %d rows", kind, m.n_estimators, len(y))
    return m


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@dataclass
class GridSearchResult:
    kind: str
    table: List[Dict[str, float]]
    best_n_estimators: int
    best_accuracy: float
    model: EnsembleModel


def grid_search(
    X: np.ndarray,
    y: np.ndarray,
    kind: str,
    grid: Sequence[int] = (1, 100, 200, 500, 1000, 1500),
    folds: int = 5,
    seed: int = 0,
    cfg: Optional[ModelConfig] = None,
    schema_hash: Optional[str] = None,
) -> GridSearchResult:
    """
    Cross-validated mean accuracy (percent) per n_estimators value.

    One model with max(grid) trees is trained per fold and every grid point is
    scored on its first-n-trees prefix, which equals a model trained with n
    trees under the same seed. Ties go to the smaller n_estimators.
    """
    from core.dataset import kfold_indices

    if folds not in (5, 10):
        raise ConfigInvalid("grid search folds must be 5 or 10")
    grid = sorted(set(int(g) for g in grid))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    top = max(grid)
    scores = {n: [] for n in grid}
    for f, test_idx in enumerate(kfold_indices(y, folds, seed)):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        m = train_model(kind, X[train_mask], y[train_mask], cfg, seed, top, schema_hash)
        for n, acc in staged_accuracy(m, X[test_idx], y[test_idx], grid).items():
            scores[n].append(acc)
        logger.info("Grid search %s: fold %d/%d done", kind, f + 1, folds)

    table = [{"n_estimators": n, "accuracy": 100.0 * float(np.mean(scores[n]))} for n in grid]
    best = max(table, key=lambda row: (row["accuracy"], -row["n_estimators"]))
    full = train_model(kind, X, y, cfg, seed, top, schema_hash).truncated(best["n_estimators"])
    return GridSearchResult(kind, table, best["n_estimators"], best["accuracy"], full)
