"""
K-Means over scaled feature vectors, elbow selection of k, and a
principal-direction 2-D projection for scatter plots.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import TooFewPoints
from core.logger import get_logger

logger = get_logger("clusterer")

ELBOW_RANGE = tuple(range(1, 10))


@dataclass
class KMeansResult:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    distortion: float
    iterations: int
    seed: int
    trace: Tuple[float, ...] = ()


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted seeding."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = _sq_dists(X, np.asarray(centers)).min(1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(X[idx])
        closest = np.minimum(closest, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.asarray(centers, dtype=float)


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int) -> Tuple[np.ndarray, np.ndarray, float, int, List[float]]:
    C = C.copy()
    trace: List[float] = []
    assign = np.zeros(X.shape[0], dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        assign = D.argmin(1)
        trace.append(float(D[np.arange(X.shape[0]), assign].sum()))
        new_C = C.copy()
        cost = D[np.arange(X.shape[0]), assign].copy()
        for j in range(C.shape[0]):
            members = assign == j
            if members.any():
                new_C[j] = X[members].mean(0)
            else:
                # empty cluster: take the point farthest from its centroid
                far = int(cost.argmax())
                new_C[j] = X[far]
                assign[far] = j
                cost[far] = 0.0
        if np.allclose(new_C, C, rtol=0.0, atol=1e-12):
            C = new_C
            break
        C = new_C
    D = _sq_dists(X, C)
    assign = D.argmin(1)
    distortion = float(((X - C[assign]) ** 2).sum())
    return C, assign, distortion, it, trace


def kmeans(
    vectors: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    restarts: int = 5,
    init: Optional[np.ndarray] = None,
) -> KMeansResult:
    """
    Lloyd iterations from k-means++ seeds; the lowest-distortion restart wins.

    ``init`` replaces seeding for one extra run (used by the elbow scan).
    """
    X = np.asarray(vectors, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.ndim != 2 or X.shape[0] < k:
        raise TooFewPoints(f"{X.shape[0] if X.ndim == 2 else 0} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    starts = [_plusplus(X, k, rng) for _ in range(max(1, restarts))]
    if init is not None:
        starts.append(np.asarray(init, dtype=float))

    best: Optional[KMeansResult] = None
    for start in starts:
        C, assign, distortion, iters, trace = _lloyd(X, start, max_iter)
        if best is None or distortion < best.distortion:
            best = KMeansResult(k, C, assign, distortion, iters, seed, tuple(trace))
    return best


def _farthest(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return X[int(_sq_dists(X, C).min(1).argmax())]


def chosen_elbow(curve: Sequence[float], ks: Sequence[int]) -> int:
    """k with the largest second difference d[k-1] - 2 d[k] + d[k+1]."""
    d = np.asarray(curve, dtype=float)
    if d.size < 3:
        return int(ks[0])
    second = d[:-2] - 2.0 * d[1:-1] + d[2:]
    return int(ks[1 + int(np.argmax(second))])


def elbow_scan(
    vectors: np.ndarray,
    k_range: Sequence[int] = ELBOW_RANGE,
    seed: int = 0,
    restarts: int = 5,
    max_iter: int = 300,
) -> Tuple[List[float], int, List[KMeansResult]]:
    """
    Distortion per k and the elbow choice.

    Each k also warm-starts from the k-1 solution plus the farthest point, so
    the curve never increases.
    """
    X = np.asarray(vectors, dtype=float)
    ks = list(k_range)
    if X.ndim != 2 or X.shape[0] < max(ks):
        raise TooFewPoints(f"elbow scan up to k={max(ks)} needs at least {max(ks)} points")
    results: List[KMeansResult] = []
    prev: Optional[KMeansResult] = None
    for k in ks:
        init = None
        if prev is not None and prev.k == k - 1:
            init = np.vstack([prev.centroids, _farthest(X, prev.centroids)])
        res = kmeans(X, k, seed, max_iter, restarts, init)
        results.append(res)
        prev = res
    curve = [r.distortion for r in results]
    chosen = chosen_elbow(curve, ks)
    logger.info("Elbow scan over k=%d..%d chose k=%d", ks[0], ks[-1], chosen)
    return curve, chosen, results


def project_2d(vectors: np.ndarray, iterations: int = 500, tol: float = 1e-12) -> np.ndarray:
    """
    Coordinates on the top two principal directions of the centered data.

    Directions come from power iteration with deflation; each direction is
    signed so its largest-magnitude component is positive. Rank-0 data maps
    to the origin.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewPoints("projection needs at least 2 vectors")
    Xc = X - X.mean(0)
    cov = Xc.T @ Xc
    p = cov.shape[0]
    scale = np.abs(cov).max()
    out = np.zeros((X.shape[0], 2))
    if scale <= 0:
        return out

    directions: List[np.ndarray] = []
    for comp in range(min(2, p)):
        v = np.ones(p) / np.sqrt(p) + 1e-3 * np.arange(p)
        for prev in directions:
            v -= (v @ prev) * prev
        if np.linalg.norm(v) == 0:
            break
        v /= np.linalg.norm(v)
        for _ in range(iterations):
            w = cov @ v
            for prev in directions:
                w -= (w @ prev) * prev
            norm = np.linalg.norm(w)
            if norm <= tol * scale:
                v = None
                break
            w /= norm
            done = np.linalg.norm(w - v) < 1e-13
            v = w
            if done:
                break
        if v is None:
            break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        directions.append(v)
        out[:, comp] = Xc @ v
    return out


def write_projection(path: str, coords: np.ndarray, clusters: np.ndarray, labels: Sequence[int]) -> None:
    """CSV x,y,cluster,label."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        "x": coords[:, 0],
        "y": coords[:, 1],
        "cluster": np.asarray(clusters, dtype=int),
        "label": np.asarray(labels, dtype=int),
    }).to_csv(path, index=False, lineterminator="\n", float_format="%.9g")


def write_curve(path: str, ks: Sequence[int], curve: Sequence[float]) -> None:
    """CSV k,distortion."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"k": list(ks), "distortion": list(curve)}).to_csv(
        path, index=False, lineterminator="\n", float_format="%.9g"
    )
