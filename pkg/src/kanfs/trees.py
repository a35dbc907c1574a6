"""CART decision trees with vectorised exhaustive split search.

Splits use Gini impurity (classification) or variance (regression), with
thresholds at midpoints between consecutive distinct values. Ties in gain
go to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import numba
import numpy as np

LEAF = -1


class DecisionTree:
    """Binary tree stored as flat arrays; node 0 is the root.

    Parameters
    ----------
    task : {"classification", "regression"}
    max_depth : int or None
        ``0`` gives a single leaf.
    min_samples_leaf : int
    max_features : int or None
        Number of features drawn (without replacement) at every node.
    n_classes : int
        Required for classification.
    seed : int or Generator
        Only used when ``max_features`` subsamples.
    """

    def __init__(self, task="regression", max_depth=None, min_samples_leaf=1,
                 max_features=None, n_classes=None, seed=None):
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        if task == "classification" and not n_classes:
            raise ValueError("classification trees need n_classes")
        self.task = task
        self.max_depth = max_depth
        self.min_samples_leaf = max(1, int(min_samples_leaf))
        self.max_features = max_features
        self.n_classes = n_classes
        self.rng = np.random.default_rng(seed)

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.asarray(y)
        n, d = X.shape
        self.n_features_ = d
        if self.task == "classification":
            Y = np.zeros((n, self.n_classes))
            Y[np.arange(n), y.astype(int)] = 1.0
        else:
            Y = np.ascontiguousarray(y, dtype=float)[:, None]
        mf = d if self.max_features is None else max(1, min(int(self.max_features), d))
        # per-node random keys; the mf smallest keys pick that node's candidate features
        keys = self.rng.random((2 * n - 1, d)) if mf < d else np.zeros((1, d))
        depth = -1 if self.max_depth is None else int(self.max_depth)
        (self.feature, self.threshold, self.left, self.right, self.value,
         self.n_node_samples, self.feature_importances_) = _grow(
            X, Y, self.min_samples_leaf, depth, mf, keys, self.task == "classification")
        return self

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] != LEAF
        while np.any(active):
            rows = np.nonzero(active)[0]
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict_value(self, X) -> np.ndarray:
        """Leaf values: class proportions ``(n, C)`` or means ``(n,)``."""
        v = self.value[self.apply(X)]
        return v if self.task == "classification" else v[:, 0]

    def predict(self, X) -> np.ndarray:
        v = self.predict_value(X)
        return np.argmax(v, axis=1) if self.task == "classification" else v

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else t for t in self.threshold.tolist()],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


@numba.njit(cache=True)
def _scan_splits(X, Y, idx, feats, min_leaf, classification):
    """Best (feature, threshold, gain) over ``feats`` for the rows ``idx``.

    Gain is the decrease in per-sample impurity. An impure node takes its
    best admissible split even at zero gain (XOR-like targets need this);
    feature ``-1`` means the node is pure or no admissible split exists.
    """
    n = idx.size
    c = Y.shape[1]
    total = np.zeros(c)
    sq_total = 0.0
    for i in range(n):
        for k in range(c):
            total[k] += Y[idx[i], k]
        sq_total += Y[idx[i], 0] ** 2
    if classification:
        parent = 1.0
        for k in range(c):
            parent -= (total[k] / n) ** 2
    else:
        parent = sq_total / n - (total[0] / n) ** 2
    best_gain = -np.inf
    best_f = -1
    best_thr = 0.0
    y_min = Y[idx[0], 0]
    y_max = y_min
    for i in range(n):
        y_min = min(y_min, Y[idx[i], 0])
        y_max = max(y_max, Y[idx[i], 0])
    if classification:
        pure = False
        for k in range(c):
            if total[k] == n:
                pure = True
    else:
        pure = y_min == y_max
    if pure:
        return best_f, best_thr, 0.0
    xs = np.empty(n)
    left = np.empty(c)
    for f in feats:
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        left[:] = 0.0
        sq_left = 0.0
        for pos in range(n - 1):
            row = idx[order[pos]]
            for k in range(c):
                left[k] += Y[row, k]
            sq_left += Y[row, 0] ** 2
            nl = pos + 1.0
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            x_lo = xs[order[pos]]
            x_hi = xs[order[pos + 1]]
            if not x_hi > x_lo:
                continue
            if classification:
                gl = 1.0
                gr = 1.0
                for k in range(c):
                    gl -= (left[k] / nl) ** 2
                    gr -= ((total[k] - left[k]) / nr) ** 2
                child = (nl * gl + nr * gr) / n
            else:
                sse_l = sq_left - left[0] ** 2 / nl
                sse_r = (sq_total - sq_left) - (total[0] - left[0]) ** 2 / nr
                child = (sse_l + sse_r) / n
            gain = parent - child
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = 0.5 * (x_lo + x_hi)
                best_thr = thr if thr < x_hi else x_lo
    return best_f, best_thr, max(best_gain, 0.0)


@numba.njit(cache=True)
def _grow(X, Y, min_leaf, max_depth, max_features, keys, classification):
    n, d = X.shape
    c = Y.shape[1]
    cap = 2 * n - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, c))
    n_samples = np.zeros(cap, dtype=np.int64)
    importances = np.zeros(d)

    rows = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    all_feats = np.arange(d)

    for i in range(n):
        for k in range(c):
            value[0, k] += Y[i, k]
    value[0] /= n
    n_samples[0] = n
    count = 1
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    sp = 1
    while sp > 0:
        sp -= 1
        node, start, end, depth = st_node[sp], st_start[sp], st_end[sp], st_depth[sp]
        size = end - start
        if max_depth >= 0 and depth >= max_depth:
            continue
        if size < 2 * min_leaf:
            continue
        if max_features < d:
            feats = np.sort(np.argsort(keys[node])[:max_features])
        else:
            feats = all_feats
        f, thr, gain = _scan_splits(X, Y, rows[start:end], feats, min_leaf, classification)
        if f < 0:
            continue
        nl = 0
        for i in range(start, end):
            if X[rows[i], f] <= thr:
                buf[nl] = rows[i]
                nl += 1
        nr = nl
        for i in range(start, end):
            if not X[rows[i], f] <= thr:
                buf[nr] = rows[i]
                nr += 1
        rows[start:end] = buf[:size]
        importances[f] += gain * size
        feature[node] = f
        threshold[node] = thr
        ln = count
        rn = count + 1
        count += 2
        left[node] = ln
        right[node] = rn
        n_samples[ln] = nl
        n_samples[rn] = size - nl
        for i in range(start, end):
            child = ln if i < start + nl else rn
            for k in range(c):
                value[child, k] += Y[rows[i], k]
        value[ln] /= nl
        value[rn] /= size - nl
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rn, start + nl, end, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = ln, start, start + nl, depth + 1
        sp += 1
    return (feature[:count], threshold[:count], left[:count], right[:count],
            value[:count], n_samples[:count], importances)
