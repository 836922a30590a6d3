"""Random-forest classifier producing a suspiciousness score in [0, 1].

Each tree is grown on a bootstrap sample with ``ceil(sqrt(d))`` candidate
features per node (Gini criterion); the forest score is the mean of the
leaf positive fractions.  Tree ``t`` draws all of its randomness from
``SeedSequence([seed, t])``, so training with any number of threads gives
the same model.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels

MODEL_FORMAT = "tfaml-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_split: int = 10
    min_leaf: int = 5
    max_depth: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_split < 2:
            raise ValueError("min_split must be >= 2")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class Tree:
    """Flat pre-order node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray

    def __len__(self) -> int:
        return len(self.feature)

    def predict(self, X) -> np.ndarray:
        return _kernels.predict_tree(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def to_nested(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"n": int(self.n_node[node]), "value": float(self.value[node])}
        return {
            "n": int(self.n_node[node]),
            "value": float(self.value[node]),
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    @classmethod
    def from_nested(cls, root: Mapping) -> "Tree":
        feature, threshold, left, right, value, n_node = [], [], [], [], [], []

        def visit(nd):
            i = len(feature)
            feature.append(int(nd.get("feature", -1)))
            threshold.append(float(nd.get("threshold", 0.0)))
            left.append(-1)
            right.append(-1)
            value.append(float(nd["value"]))
            n_node.append(int(nd["n"]))
            if feature[i] >= 0:
                left[i] = visit(nd["left"])
                right[i] = visit(nd["right"])
            return i

        visit(root)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
            np.array(n_node, dtype=np.int64),
        )


@dataclass
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    feature_order: list[str]
    meta: dict = field(default_factory=dict)

    def score_matrix(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_order):
            raise ValueError(
                f"expected {len(self.feature_order)} feature columns, got shape {X.shape}"
            )
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


class DegenerateLabels(ValueError):
    pass


def gini(labels) -> float:
    """Two-class Gini impurity ``1 - p0^2 - p1^2``."""
    y = np.asarray(labels)
    if y.size == 0:
        return 0.0
    p1 = float(np.count_nonzero(y)) / y.size
    p0 = 1.0 - p1
    return 1.0 - p0 * p0 - p1 * p1


def max_features(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))


def _tree_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, t])))


def _grow(X, y, params: ForestParams, t: int) -> Tree:
    rng = _tree_rng(params.seed, t)
    n = X.shape[0]
    sample = rng.integers(0, n, size=n)
    kernel_seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    arrays = _kernels.build_tree(
        X,
        y,
        sample,
        params.min_split,
        params.min_leaf,
        params.max_depth,
        max_features(X.shape[1]),
        kernel_seed,
    )
    return Tree(*arrays)


def train(data, params: ForestParams = ForestParams(), threads: int | None = 1) -> ForestModel:
    """Fit a forest on ``data`` (a :class:`~tfaml.dataset.LabeledDataset`).

    ``threads`` > 1 grows trees concurrently; the result is identical.
    """
    X = np.ascontiguousarray(data.X, dtype=np.float64)
    y = np.ascontiguousarray(data.y, dtype=np.intp)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows to train")
    if X.shape[1] == 0:
        raise ValueError("dataset has no feature columns")
    pos = int(y.sum())
    if pos == 0 or pos == len(y):
        raise DegenerateLabels("degenerate labels: training data has a single class")

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda t: _grow(X, y, params, t), range(params.n_trees)))
    else:
        trees = [_grow(X, y, params, t) for t in range(params.n_trees)]
    return ForestModel(trees, params, list(data.feature_order))


def _row_vector(model: ForestModel, row) -> np.ndarray:
    values = row if isinstance(row, Mapping) else getattr(row, "values", row)
    if isinstance(values, Mapping):
        missing = [f for f in model.feature_order if f not in values]
        if missing:
            raise KeyError(f"row is missing features: {', '.join(missing)}")
        return np.array([[float(values[f]) for f in model.feature_order]])
    arr = np.asarray(values, dtype=np.float64).reshape(1, -1)
    if arr.shape[1] != len(model.feature_order):
        raise KeyError(f"row has {arr.shape[1]} values, model needs {len(model.feature_order)}")
    return arr


def score(model: ForestModel, row) -> float:
    """Score one row: a FeatureVector, a name -> value mapping, or an array."""
    return float(model.score_matrix(_row_vector(model, row))[0])


def decide(score_value: float, threshold: float = 0.5) -> bool:
    """Positive (suspicious) iff ``score_value > threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return score_value > threshold


def audit(model: ForestModel) -> list[str]:
    """Check depth, min_split and min_leaf on every tree; returns violations."""
    p = model.params
    problems = []
    for t, tree in enumerate(model.trees):
        stack = [(0, 0)]
        while stack:
            node, depth = stack.pop()
            n = int(tree.n_node[node])
            if depth > p.max_depth:
                problems.append(f"tree {t} node {node}: depth {depth} > max_depth {p.max_depth}")
            if tree.feature[node] < 0:
                if node != 0 and n < p.min_leaf:
                    problems.append(f"tree {t} node {node}: leaf with {n} < min_leaf samples")
                continue
            if n < p.min_split:
                problems.append(f"tree {t} node {node}: split with {n} < min_split samples")
            left, right = int(tree.left[node]), int(tree.right[node])
            if tree.n_node[left] + tree.n_node[right] != n:
                problems.append(f"tree {t} node {node}: children do not partition samples")
            for child in (left, right):
                if tree.n_node[child] < p.min_leaf:
                    problems.append(f"tree {t} node {node}: child below min_leaf")
                stack.append((child, depth + 1))
    return problems


def model_to_dict(model: ForestModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": asdict(model.params),
        "feature_order": list(model.feature_order),
        "meta": model.meta,
        "trees": [tree.to_nested() for tree in model.trees],
    }


def model_from_dict(d: Mapping) -> ForestModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a tfaml forest model")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    return ForestModel(
        [Tree.from_nested(t) for t in d["trees"]],
        ForestParams(**d["params"]),
        list(d["feature_order"]),
        dict(d.get("meta", {})),
    )


def save(model: ForestModel, path) -> None:
    # json writes floats with repr(), which round-trips exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def feature_positions(model: ForestModel, names: Sequence[str]) -> list[int]:
    index = {n: i for i, n in enumerate(names)}
    missing = [f for f in model.feature_order if f not in index]
    if missing:
        raise KeyError(f"data is missing model features: {', '.join(missing)}")
    return [index[f] for f in model.feature_order]
