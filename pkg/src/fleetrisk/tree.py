"""Depth-capped Gini decision tree, the start-kit style baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_CLASSES = 3


def majority(counts: np.ndarray) -> int:
    """Most frequent class; ties go to the higher-risk class."""
    counts = np.asarray(counts)
    return int(len(counts) - 1 - np.argmax(counts[::-1]))


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


@dataclass
class Node:
    prediction: int
    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, y: np.ndarray) -> tuple[int, float, float] | None:
    n = len(y)
    parent = gini(np.bincount(y, minlength=N_CLASSES)) * n
    best = None
    best_impurity = parent - 1e-12
    onehot = np.eye(N_CLASSES)[y]
    total = onehot.sum(axis=0)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        n_left = np.arange(1, n)
        n_right = n - n_left
        imp = (n_left - (left ** 2).sum(axis=1) / n_left) + (n_right - (right ** 2).sum(axis=1) / n_right)
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        imp = np.where(valid, imp, np.inf)
        k = int(np.argmin(imp))
        if imp[k] < best_impurity:
            best_impurity = imp[k]
            best = (f, 0.5 * (xs[k] + xs[k + 1]), float(imp[k]))
    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, min_leaf: int) -> Node:
    counts = np.bincount(y, minlength=N_CLASSES)
    node = Node(prediction=majority(counts), counts=counts)
    if depth == 0 or len(y) < 2 * min_leaf or np.count_nonzero(counts) == 1:
        return node
    split = _best_split(X, y)
    if split is None:
        return node
    f, thr, _ = split
    mask = X[:, f] <= thr
    if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
        return node
    node.feature, node.threshold = f, thr
    node.left = _grow(X[mask], y[mask], depth - 1, min_leaf)
    node.right = _grow(X[~mask], y[~mask], depth - 1, min_leaf)
    return node


@dataclass(eq=False)
class TreeClassifier:
    root: Node
    depth: int

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(len(X), dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.prediction
        return out

    def n_leaves(self) -> int:
        stack, n = [self.root], 0
        while stack:
            node = stack.pop()
            if node.is_leaf:
                n += 1
            else:
                stack.extend([node.left, node.right])
        return n


def fit_tree_baseline(X, y, depth: int = 5, min_leaf: int = 1) -> TreeClassifier:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray([int(v) for v in y], dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("tree needs a non-empty 2-D feature matrix")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    return TreeClassifier(root=_grow(X, y, depth, min_leaf), depth=depth)
