"""CART decision trees and a bagged random forest over extracted features.

Split selection is exact: candidates are scanned with vectorized float
arithmetic, then near-ties are re-compared with arbitrary-precision integer
arithmetic, so the chosen split is the true minimizer of the count-weighted
child Gini with deterministic tie-breaking (lower feature index, then lower
threshold).  This is what lets the test suite demand exact agreement with an
exhaustive rational-arithmetic enumeration.

Per-tree RNG streams are keyed by (seed, tree index), so any parallel
training schedule produces the same forest as a serial one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dataset import AttackClass, N_CLASSES
from .neural import DimensionMismatch

# float scores within this relative band of the best are re-checked exactly
_NEAR_TIE_REL = 1e-9


class EmptyNode(Exception):
    """Gini of a node with zero examples is undefined."""


@dataclass
class Leaf:
    label: AttackClass
    class_counts: np.ndarray  # (N_CLASSES,) int64


@dataclass
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    mtry: Optional[int] = None  # None -> floor(sqrt(n_features)), clamped to [1, n_features]
    bootstrap: bool = True      # test hook; production forests always bag

    def __post_init__(self):
        if self.n_trees <= 0:
            raise ValueError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.min_samples_split <= 0:
            raise ValueError("min_samples_split must be positive")
        if self.mtry is not None and self.mtry <= 0:
            raise ValueError("mtry must be positive")


@dataclass
class Forest:
    trees: list[TreeNode]
    n_features: int
    mtry: int
    seed: int
    params: ForestParams


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    impurity: float  # count-weighted mean child Gini


def gini(class_counts) -> float:
    """Gini impurity 1 - sum(p_c^2) of a count vector; 0 for pure nodes."""
    counts = np.asarray(class_counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise EmptyNode("all class counts are zero")
    p = counts / total
    return float(1.0 - np.sum(p * p))


def best_split(X: np.ndarray, y: np.ndarray, feature_subset) -> Optional[SplitCandidate]:
    """Best threshold over the candidate features, or None if nothing helps.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of each feature.  The returned split strictly reduces the parent
    Gini; ties break toward the lower feature index, then lower threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return _best_split_on(X, y, np.arange(X.shape[0]), np.asarray(feature_subset, dtype=np.intp))


def _boundary_scores(values: np.ndarray, classes: np.ndarray):
    """Score every midpoint threshold of one feature column.

    Returns (thresholds, score, left_sq, right_sq, n_left) arrays, where
    score = sum(cL^2)/nL + sum(cR^2)/nR.  Maximizing the score minimizes the
    weighted child Gini; the integer pieces allow exact re-comparison.
    Returns None when the column is constant.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    cls = classes[order]
    n = len(v)
    boundaries = np.nonzero(v[:-1] < v[1:])[0]  # split after position i
    if len(boundaries) == 0:
        return None
    onehot = np.zeros((n, N_CLASSES), dtype=np.int64)
    onehot[np.arange(n), cls] = 1
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    c_left = cum[boundaries]
    c_right = total - c_left
    n_left = boundaries + 1
    n_right = n - n_left
    left_sq = np.sum(c_left * c_left, axis=1)
    right_sq = np.sum(c_right * c_right, axis=1)
    score = left_sq / n_left + right_sq / n_right
    thresholds = (v[boundaries] + v[boundaries + 1]) / 2.0
    return thresholds, score, left_sq, right_sq, n_left


def _best_split_on(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray, features: np.ndarray
) -> Optional[SplitCandidate]:
    n = len(idx)
    if n == 0:
        raise EmptyNode("cannot split zero examples")
    if len(features) == 0:
        raise ValueError("feature subset must be non-empty")
    classes = y[idx]

    per_feature = []
    best_score = -math.inf
    for f in np.sort(features):
        scored = _boundary_scores(X[idx, f], classes)
        if scored is None:
            continue
        per_feature.append((int(f), scored))
        best_score = max(best_score, float(scored[1].max()))
    if not per_feature:
        return None

    # exact re-comparison among float near-ties: score as the exact rational
    # (left_sq * nR + right_sq * nL) / (nL * nR), compared with python ints
    tol = _NEAR_TIE_REL * max(1.0, abs(best_score))
    best_key = None  # (num, den, feature, threshold)
    for f, (thresholds, score, left_sq, right_sq, n_left) in per_feature:
        near = np.nonzero(score >= best_score - tol)[0]
        for k in near:
            nl = int(n_left[k])
            nr = n - nl
            num = int(left_sq[k]) * nr + int(right_sq[k]) * nl
            den = nl * nr
            if best_key is None or _rational_better(num, den, best_key, f, float(thresholds[k])):
                best_key = (num, den, f, float(thresholds[k]))

    num, den, feature, threshold = best_key
    # accept only if the weighted child Gini strictly beats the parent:
    # num/den > sum(c^2)/n  <=>  num * n > sum(c^2) * den
    counts = np.bincount(classes, minlength=N_CLASSES)
    parent_sq = int(np.sum(counts.astype(np.int64) ** 2))
    if num * n <= parent_sq * den:
        return None
    impurity = (n * den - num) / (n * den)
    return SplitCandidate(feature, threshold, impurity)


def _rational_better(num: int, den: int, best_key, feature: int, threshold: float) -> bool:
    bnum, bden, bfeat, bthr = best_key
    lhs = num * bden
    rhs = bnum * den
    if lhs != rhs:
        return lhs > rhs  # strictly higher exact score
    if feature != bfeat:
        return feature < bfeat
    return threshold < bthr


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    indices: Optional[np.ndarray] = None,
    mtry: Optional[int] = None,
) -> TreeNode:
    """Grow one CART tree (iteratively; unpruned trees can get very deep).

    Stops at pure nodes, the depth limit, min_samples_split, or when no
    split reduces impurity.  Each split draws ``mtry`` distinct feature
    indices from ``rng``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if indices is None:
        indices = np.arange(X.shape[0])
    if len(indices) == 0:
        raise EmptyNode("cannot grow a tree on zero examples")
    d = X.shape[1]
    m = _resolve_mtry(mtry if mtry is not None else params.mtry, d)

    root_holder: list[TreeNode] = [None]  # type: ignore[list-item]
    # stack entries: (node indices, depth, parent Split or holder, side)
    stack = [(indices, 0, root_holder, 0)]
    while stack:
        idx, depth, parent, side = stack.pop()
        counts = np.bincount(y[idx], minlength=N_CLASSES).astype(np.int64)
        node: TreeNode
        candidate = None
        splittable = (
            int((counts > 0).sum()) > 1
            and len(idx) >= params.min_samples_split
            and (params.max_depth is None or depth < params.max_depth)
        )
        if splittable:
            features = rng.choice(d, size=m, replace=False)
            candidate = _best_split_on(X, y, idx, features)
        if candidate is None:
            node = Leaf(AttackClass.from_index(int(np.argmax(counts))), counts)
        else:
            node = Split(candidate.feature, candidate.threshold, None, None)  # type: ignore[arg-type]
            mask = X[idx, candidate.feature] <= candidate.threshold
            # right pushed first so the left subtree is built first (stable rng order)
            stack.append((idx[~mask], depth + 1, node, 1))
            stack.append((idx[mask], depth + 1, node, 0))
        if isinstance(parent, list):
            parent[0] = node
        elif side == 0:
            parent.left = node
        else:
            parent.right = node
    return root_holder[0]


def _resolve_mtry(mtry: Optional[int], n_features: int) -> int:
    if mtry is None:
        mtry = int(math.floor(math.sqrt(n_features)))
    return max(1, min(mtry, n_features))


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def _grow_bagged(X, y, params: ForestParams, seed: int, t: int, mtry: int) -> TreeNode:
    rng = _tree_rng(seed, t)
    n = X.shape[0]
    if params.bootstrap:
        indices = rng.integers(0, n, size=n)
    else:
        indices = np.arange(n)
    return grow_tree(X, y, params, rng, indices=indices, mtry=mtry)


def train_forest(
    X: np.ndarray, y: np.ndarray, params: ForestParams, seed: int, n_jobs: int = 1
) -> Forest:
    """Train n_trees bagged trees; bit-identical for a fixed seed at any n_jobs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise EmptyNode("cannot train a forest on zero examples")
    d = X.shape[1]
    mtry = _resolve_mtry(params.mtry, d)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda t: _grow_bagged(X, y, params, seed, t, mtry),
                                  range(params.n_trees)))
    else:
        trees = [_grow_bagged(X, y, params, seed, t, mtry) for t in range(params.n_trees)]
    return Forest(trees, d, mtry, seed, params)


def _route(tree: TreeNode, x: np.ndarray) -> Leaf:
    node = tree
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def predict(forest: Forest, x: np.ndarray) -> tuple[AttackClass, np.ndarray]:
    """Majority vote over the trees' leaves; ties go to the lower class index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != forest.n_features:
        raise DimensionMismatch(forest.n_features, x.shape[-1], "forest input")
    votes = np.zeros(N_CLASSES, dtype=np.int64)
    for tree in forest.trees:
        votes[_route(tree, x).label.index] += 1
    return AttackClass.from_index(int(np.argmax(votes))), votes


def _apply_tree(tree: TreeNode, X: np.ndarray, out: np.ndarray) -> None:
    stack = [(tree, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if isinstance(node, Leaf):
            out[idx] = node.label.index
            continue
        mask = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))


def predict_matrix(forest: Forest, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized prediction; returns (class indices (n,), vote counts (n, 5))."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != forest.n_features:
        raise DimensionMismatch(forest.n_features, X.shape[1], "forest input")
    n = X.shape[0]
    votes = np.zeros((n, N_CLASSES), dtype=np.int64)
    leaf_class = np.empty(n, dtype=np.int64)
    rows = np.arange(n)
    for tree in forest.trees:
        _apply_tree(tree, X, leaf_class)
        votes[rows, leaf_class] += 1
    return np.argmax(votes, axis=1), votes
