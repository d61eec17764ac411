"""Extremely randomised regression trees with per-tree bootstrap resampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import substream

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    # None means one candidate cut per input dimension
    k_candidate_cuts: int | None = None
    min_samples_leaf: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees and min_samples_leaf must be >= 1")
        if self.k_candidate_cuts is not None and self.k_candidate_cuts < 1:
            raise ValueError("k_candidate_cuts must be >= 1")


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    sample: np.ndarray  # training indices drawn for this tree

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while np.any(active):
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class ForestState:
    params: ForestParams
    trees: tuple


def _sse(y: np.ndarray) -> float:
    return float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0


def _grow(X: np.ndarray, y: np.ndarray, k: int, min_leaf: int, rng: np.random.Generator, sample: np.ndarray) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[rows].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    d = X.shape[1]
    while stack:
        node, rows = stack.pop()
        yr = y[rows]
        if rows.size < 2 * min_leaf or np.ptp(yr) == 0.0:
            continue
        Xr = X[rows]
        lo, hi = Xr.min(axis=0), Xr.max(axis=0)
        best = None
        for _ in range(k):
            j = int(rng.integers(d))
            cut = float(rng.uniform(lo[j], hi[j]))
            if hi[j] <= lo[j]:
                continue
            mask = Xr[:, j] <= cut
            nl = int(mask.sum())
            if nl < min_leaf or rows.size - nl < min_leaf:
                continue
            score = _sse(yr[mask]) + _sse(yr[~mask])
            if best is None or score < best[0]:
                best = (score, j, cut, mask)
        if best is None:
            continue
        _, j, cut, mask = best
        feature[node] = j
        threshold[node] = cut
        lrows, rrows = rows[mask], rows[~mask]
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows))
        stack.append((left[node], lrows))
    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                np.array(value), sample)


def extra_trees_fit(params: ForestParams, X, f, seed: int | None = None) -> ForestState:
    """Grow ``params.n_trees`` trees, each from its own seeded substream.

    Each internal node draws ``k`` random (feature, threshold) pairs inside
    the node's data range and keeps the one with the lowest summed child
    squared error.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(f, dtype=float).reshape(-1)
    t, d = X.shape
    seed = params.seed if seed is None else seed
    k = d if params.k_candidate_cuts is None else params.k_candidate_cuts
    trees = []
    for i in range(params.n_trees):
        rng = substream(seed, "forest-tree", i)
        sample = rng.integers(0, t, size=t) if params.bootstrap else np.arange(t)
        trees.append(_grow(X[sample], f[sample], k, params.min_samples_leaf, rng, sample))
    return ForestState(params, tuple(trees))


def extra_trees_predict(state: ForestState, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    for tree in state.trees:
        out += tree.predict(X)
    return out / len(state.trees)
