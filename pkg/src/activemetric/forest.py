"""Per-instance class probabilities from a random forest's out-of-bag votes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import DatasetView


@dataclass(frozen=True)
class ClassProbs:
    """Row-stochastic n x C matrix of per-instance class probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] == 0:
            raise ValueError(f"probs must be a non-empty 2-D matrix, got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
            raise ValueError("entries must lie in [0, 1]")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("rows must sum to 1 within 1e-9")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def uniform(cls, n: int, num_classes: int) -> "ClassProbs":
        return cls(np.full((n, num_classes), 1.0 / num_classes))


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 50
    max_depth: Optional[int] = None
    min_leaf: int = 1
    features_per_split: Optional[int] = None  # None -> ceil(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 when set")


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "prediction")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, prediction=-1):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.prediction = prediction


def _gini_best_split(x, y, idx, features, num_classes, min_leaf):
    """Lowest weighted child Gini over (feature, threshold); None if no valid cut.

    Ties resolve to the first candidate in (ascending feature, ascending
    threshold) order so tree construction is fully deterministic.
    """
    n = len(idx)
    best = None
    for f in features:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[idx[order]]
        onehot = np.zeros((n, num_classes))
        onehot[np.arange(n), sy] = 1.0
        left_counts = np.cumsum(onehot, axis=0)
        total = left_counts[-1]

        cut = np.arange(1, n)  # split between positions cut-1 and cut
        valid = sv[1:] > sv[:-1]
        if min_leaf > 1:
            valid &= (cut >= min_leaf) & (n - cut >= min_leaf)
        if not valid.any():
            continue
        lc = left_counts[:-1]
        rc = total[None, :] - lc
        nl = cut.astype(np.float64)
        nr = n - nl
        gini_l = 1.0 - np.sum((lc / nl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((rc / nr[:, None]) ** 2, axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        weighted[~valid] = np.inf
        pos = int(np.argmin(weighted))
        if best is None or weighted[pos] < best[0]:
            thr = 0.5 * (sv[pos] + sv[pos + 1])
            best = (float(weighted[pos]), f, thr)
    return best


def _build_tree(x, y, idx, num_classes, params, rng, depth=0):
    counts = np.bincount(y[idx], minlength=num_classes)
    majority = int(np.argmax(counts))
    node = _Node(prediction=majority)
    if counts.max() == len(idx):
        return node
    if params.max_depth is not None and depth >= params.max_depth:
        return node
    if len(idx) < 2 * params.min_leaf:
        return node

    d = x.shape[1]
    m = params.features_per_split or math.ceil(math.sqrt(d))
    m = min(m, d)
    features = np.sort(rng.choice(d, size=m, replace=False))
    best = _gini_best_split(x, y, idx, features, num_classes, params.min_leaf)
    if best is None:
        return node
    _, f, thr = best
    mask = x[idx, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _build_tree(x, y, idx[mask], num_classes, params, rng, depth + 1)
    node.right = _build_tree(x, y, idx[~mask], num_classes, params, rng, depth + 1)
    return node


def _apply_tree(node, x, idx, out):
    if node.left is None:
        out[idx] = node.prediction
        return
    mask = x[idx, node.feature] <= node.threshold
    _apply_tree(node.left, x, idx[mask], out)
    _apply_tree(node.right, x, idx[~mask], out)


class RandomForest:
    """Bootstrap CART ensemble exposing its in-bag membership for OOB reads."""

    def __init__(self, params: ForestParams, num_classes: int):
        self.params = params
        self.num_classes = num_classes
        self.trees: list[_Node] = []
        self.inbag_counts: Optional[np.ndarray] = None  # (num_trees, n)
        self.train_predictions: Optional[np.ndarray] = None  # (num_trees, n)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RandomForest":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = len(x)
        if n == 0:
            raise ValueError("empty training set")
        t = self.params.num_trees
        self.inbag_counts = np.zeros((t, n), dtype=np.int64)
        self.train_predictions = np.zeros((t, n), dtype=np.int64)
        seeds = np.random.SeedSequence(self.params.seed).spawn(t)
        for ti in range(t):
            rng = np.random.default_rng(seeds[ti])
            sample = rng.integers(0, n, size=n)
            self.inbag_counts[ti] = np.bincount(sample, minlength=n)
            tree = _build_tree(x, y, sample, self.num_classes, self.params, rng)
            self.trees.append(tree)
            _apply_tree(tree, x, np.arange(n), self.train_predictions[ti])
        return self

    def oob_vote_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-instance class vote counts over trees whose bootstrap missed it."""
        t, n = self.inbag_counts.shape
        votes = np.zeros((n, self.num_classes), dtype=np.int64)
        oob = self.inbag_counts == 0
        for ti in range(t):
            rows = np.flatnonzero(oob[ti])
            np.add.at(votes, (rows, self.train_predictions[ti, rows]), 1)
        return votes, oob.sum(axis=0)


def estimate_class_probs(
    train: DatasetView,
    cluster_labels: np.ndarray,
    params: ForestParams,
    num_classes: Optional[int] = None,
) -> ClassProbs:
    """p(y_h = c) from out-of-bag forest votes on surrogate cluster labels.

    Trees whose bootstrap sample contains instance h contribute nothing to
    row h; an instance that happens to be in-bag everywhere falls back to
    the full-forest vote. Vote fractions are Laplace-smoothed,
    (votes_c + 1) / (total + C), so every entry stays strictly positive and
    downstream entropy terms are finite.
    """
    y = np.asarray(cluster_labels, dtype=np.int64)
    n = len(train)
    if y.shape != (n,):
        raise ValueError(f"cluster_labels shape {y.shape} does not match view of {n}")
    c = num_classes if num_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= c:
        raise ValueError("cluster label outside [0, num_classes)")

    forest = RandomForest(params, c).fit(train.features, y)
    votes, oob_tree_counts = forest.oob_vote_counts()

    # fallback for instances that were in-bag in every tree
    no_oob = oob_tree_counts == 0
    if no_oob.any():
        full = np.zeros((n, c), dtype=np.int64)
        for ti in range(params.num_trees):
            rows = np.flatnonzero(no_oob)
            np.add.at(full, (rows, forest.train_predictions[ti, rows]), 1)
        votes[no_oob] = full[no_oob]

    totals = votes.sum(axis=1, keepdims=True)
    probs = (votes + 1.0) / (totals + c)
    return ClassProbs(probs)
