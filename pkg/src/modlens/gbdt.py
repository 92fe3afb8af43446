"""Gradient-boosted regression trees with exact greedy squared-error splits.

Intentionally unregularized: the explainer wants an overfit model, so
the defaults are deep trees (depth 10), 300 rounds, learning rate 0.3,
min_leaf 1.  Split ties break deterministically toward the lowest
feature index, then the lowest threshold.  Node covers (training sample
counts) are stored for the path-dependent Shapley computation.

The split scan and tree traversal run through the numba/numpy kernel
backend (see `_backend`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._backend import compile_kernel

DEFAULT_PARAMS = {"max_depth": 10, "n_trees": 300, "learning_rate": 0.3, "min_leaf": 1}


def _best_split_impl(x, y, min_leaf):
    """Scan all (feature, threshold) pairs; returns (feat, thr, gain).

    feat is -1 when no split improves the squared-error by more than 0.
    """
    n, m = x.shape
    total_sum = 0.0
    total_sq = 0.0
    for i in range(n):
        total_sum += y[i]
        total_sq += y[i] * y[i]
    parent_sse = total_sq - total_sum * total_sum / n

    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    for f in range(m):
        order = np.argsort(x[:, f], kind="mergesort")
        left_sum = 0.0
        left_sq = 0.0
        for k in range(n - 1):
            idx = order[k]
            left_sum += y[idx]
            left_sq += y[idx] * y[idx]
            xv = x[idx, f]
            xn = x[order[k + 1], f]
            if xn <= xv:
                continue
            nl = k + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            right_sum = total_sum - left_sum
            right_sq = total_sq - left_sq
            sse = (left_sq - left_sum * left_sum / nl) + (
                right_sq - right_sum * right_sum / nr
            )
            gain = parent_sse - sse
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                best_thr = xv + 0.5 * (xn - xv)
    return best_feat, best_thr, best_gain


def _predict_impl(feature, threshold, left, right, value, x):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


_best_split = compile_kernel(_best_split_impl)
_predict_tree = compile_kernel(_predict_impl)


@dataclass
class RegressionTree:
    """Binary tree in array form; feature[i] == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        return _predict_tree(
            self.feature, self.threshold, self.left, self.right, self.value,
            np.ascontiguousarray(x, dtype=float),
        )

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes(), dtype=int)
        for i in range(self.n_nodes()):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if len(depths) else 0


def _build_tree(x, y, max_depth: int, min_leaf: int) -> RegressionTree:
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    def grow(rows, depth):
        node = new_node()
        yn = y[rows]
        cover[node] = float(len(rows))
        value[node] = float(np.mean(yn))
        if depth >= max_depth or len(rows) < 2 * min_leaf:
            return node
        xn = np.ascontiguousarray(x[rows], dtype=float)
        feat, thr, gain = _best_split(xn, yn, min_leaf)
        if feat < 0 or gain <= 0.0:
            return node
        mask = xn[:, feat] < thr
        feature[node] = int(feat)
        threshold[node] = float(thr)
        l = grow(rows[mask], depth + 1)
        r = grow(rows[~mask], depth + 1)
        left[node] = l
        right[node] = r
        return node

    grow(np.arange(len(y)), 0)
    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        cover=np.asarray(cover, dtype=float),
    )


@dataclass
class TreeEnsemble:
    base_score: float
    learning_rate: float
    trees: list[RegressionTree] = field(default_factory=list)
    n_features: int = 0

    def predict_many(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite feature value")
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict_many(x)
        return out

    def predict(self, x) -> float:
        return float(self.predict_many(np.atleast_2d(x))[0])

    def to_dict(self) -> dict:
        return {
            "kind": "gbdt-regressor",
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "cover": t.cover.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeEnsemble":
        trees = []
        for td in doc["trees"]:
            tree = RegressionTree(
                feature=np.asarray(td["feature"], dtype=np.int64),
                threshold=np.asarray(td["threshold"], dtype=float),
                left=np.asarray(td["left"], dtype=np.int64),
                right=np.asarray(td["right"], dtype=np.int64),
                value=np.asarray(td["value"], dtype=float),
                cover=np.asarray(td["cover"], dtype=float),
            )
            if np.any(tree.cover <= 0.0):
                raise ValueError("model rejected: zero-cover node")
            trees.append(tree)
        return cls(
            base_score=float(doc["base_score"]),
            learning_rate=float(doc["learning_rate"]),
            trees=trees,
            n_features=int(doc["n_features"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "TreeEnsemble":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit(x, y, params: dict | None = None) -> TreeEnsemble:
    """Boosted squared-error fit; constant targets yield zero trees."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n, m) with matching y")
    if len(y) < 2:
        raise ValueError("need at least two rows")
    opts = dict(DEFAULT_PARAMS)
    if params:
        opts.update(params)

    base = float(np.mean(y))
    ensemble = TreeEnsemble(base_score=base, learning_rate=float(opts["learning_rate"]),
                            n_features=x.shape[1])
    resid = y - base
    for _ in range(int(opts["n_trees"])):
        if float(np.max(resid) - np.min(resid)) == 0.0:
            break
        tree = _build_tree(x, resid, int(opts["max_depth"]), int(opts["min_leaf"]))
        if tree.feature[0] < 0:  # no usable split left
            break
        ensemble.trees.append(tree)
        resid -= ensemble.learning_rate * tree.predict_many(x)
    return ensemble


def r2_score(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    if ss_tot == 0.0:
        return 0.0
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot
