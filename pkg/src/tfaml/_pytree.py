"""Pure-Python/numpy tree kernels.

Reference implementation of the compiled ``_ctree`` module; both must grow
bit-identical trees from identical inputs.  The shared contract:

* nodes are numbered in pre-order (node, left subtree, right subtree);
* a node is a leaf if ``depth >= max_depth``, ``n < min_split``, it is
  pure, or no candidate split leaves ``min_leaf`` samples on each side;
* otherwise ``max_features`` features are drawn by a partial Fisher-Yates
  shuffle driven by splitmix64, then visited in ascending index order;
* candidate thresholds are midpoints between consecutive distinct values;
  a split maximises ``(l0^2 + l1^2)/nl + (r0^2 + r1^2)/nr`` (equivalent
  to the largest Gini decrease), first maximum wins;
* samples with ``x <= threshold`` go left.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        return self.next() % bound


def sample_features(rng: SplitMix64, n_features: int, k: int) -> list[int]:
    perm = list(range(n_features))
    for i in range(k):
        j = i + rng.below(n_features - i)
        perm[i], perm[j] = perm[j], perm[i]
    return sorted(perm[:k])


def _best_split(X, y, idx, features, min_leaf):
    n = idx.size
    yn = y[idx]
    total_pos = float(yn.sum())
    nl = np.arange(1, n, dtype=np.float64)
    nr = float(n) - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    best = (-np.inf, -1, 0.0)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        pl = np.cumsum(yn[order][:-1], dtype=np.float64)
        ql = nl - pl
        pr = total_pos - pl
        qr = nr - pr
        proxy = (pl * pl + ql * ql) / nl + (pr * pr + qr * qr) / nr
        valid = size_ok & (v[:-1] < v[1:])
        if not valid.any():
            continue
        proxy = np.where(valid, proxy, -np.inf)
        i = int(np.argmax(proxy))
        if proxy[i] > best[0]:
            a, b = float(v[i]), float(v[i + 1])
            thr = (a + b) * 0.5
            if not (a <= thr < b):
                thr = a
            best = (float(proxy[i]), f, thr)
    return best[1], best[2]


def build_tree(X, y, sample, min_split, min_leaf, max_depth, max_features, seed):
    """Grow one tree on rows ``sample`` (may repeat) of ``X``.

    Returns ``(feature, threshold, left, right, value, n_node)`` arrays; a
    leaf has ``feature == -1`` and ``value`` is its positive fraction.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    n_features = X.shape[1]
    k = min(max_features, n_features)
    rng = SplitMix64(seed)
    feature, threshold, left, right, value, n_node = [], [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        n = idx.size
        pos = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(pos / n)
        n_node.append(n)
        if depth >= max_depth or n < min_split or pos == 0 or pos == n or n < 2 * min_leaf:
            return node
        f, thr = _best_split(X, y, idx, sample_features(rng, n_features, k), min_leaf)
        if f < 0:
            return node
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.asarray(sample, dtype=np.intp), 0)
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(n_node, dtype=np.int64),
    )


def predict_tree(feature, threshold, left, right, value, X):
    """Leaf value reached by every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]
