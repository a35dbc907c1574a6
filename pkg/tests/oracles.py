"""Slow, independent reference implementations the package is checked against.

Nothing here imports the numerical routines under test; models are read only
through their plain weight arrays and knot vectors.
"""

from __future__ import annotations

import math

import numpy as np


def cox_de_boor(t, degree, i, x):
    """Scalar recursive B-spline value ``B_{i,degree}(x)`` with right-closed last span."""
    t = list(t)
    if degree == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        last = max(j for j in range(len(t) - 1) if t[j] < t[j + 1])
        return 1.0 if (i == last and x == t[i + 1]) else 0.0
    left = right = 0.0
    if t[i + degree] > t[i]:
        left = (x - t[i]) / (t[i + degree] - t[i]) * cox_de_boor(t, degree - 1, i, x)
    if t[i + degree + 1] > t[i + 1]:
        right = (t[i + degree + 1] - x) / (t[i + degree + 1] - t[i + 1]) * cox_de_boor(t, degree - 1, i + 1, x)
    return left + right


def basis_row(t, degree, x):
    lo, hi = t[0], t[-1]
    x = min(max(x, lo), hi)
    return np.array([cox_de_boor(t, degree, i, x) for i in range(len(t) - degree - 1)])


def silu(x):
    return x / (1.0 + math.exp(-x))


def naive_layer(layer, x):
    """One KAN layer for one sample, with explicit loops."""
    act = silu if layer.activation == "silu" else (lambda v: v)
    bases = [basis_row(kv.knots, kv.degree, xp) for kv, xp in zip(layer.knots, x)]
    out = []
    for q in range(layer.out_dim):
        acc = 0.0
        for p in range(layer.in_dim):
            acc += layer.w_base[q, p] * act(x[p]) + float(np.dot(layer.w_spline[q, p], bases[p]))
        out.append(acc)
    return out


def naive_outputs(model, X):
    rows = []
    for x in np.asarray(X, dtype=float):
        h = list(x)
        for layer in model.layers:
            h = naive_layer(layer, h)
        rows.append(h)
    return np.array(rows)


def naive_loss(model, X, y):
    """Mean squared error or mean softmax cross-entropy, evaluated row by row."""
    Y = naive_outputs(model, X)
    total = 0.0
    for row, target in zip(Y, y):
        if model.task == "regression":
            total += (row[0] - target) ** 2
        else:
            m = max(row)
            lse = m + math.log(sum(math.exp(v - m) for v in row))
            total += lse - row[int(target)]
    return total / len(Y)


def naive_knockout_deltas(model, X, y):
    base = naive_loss(model, X, y)
    deltas = []
    for j in range(model.in_dim):
        m = model.copy()
        m.layers[0].w_base[:, j] = 0.0
        m.layers[0].w_spline[:, j, :] = 0.0
        deltas.append(max(0.0, naive_loss(m, X, y) - base))
    return np.array(deltas)


def central_difference(f, x, h):
    """Gradient of scalar ``f`` at array ``x`` by central differences (``x`` restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def lasso_orthonormal(X, y, lam):
    """Closed form when ``X^T X / n = I``: soft-threshold of ``X^T y / n``."""
    z = X.T @ y / X.shape[0]
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def entropy_mi(a, b):
    """Plug-in mutual information of two discrete label arrays (nats), via a dict count."""
    n = len(a)
    joint, pa, pb = {}, {}, {}
    for u, v in zip(a, b):
        joint[(u, v)] = joint.get((u, v), 0) + 1
        pa[u] = pa.get(u, 0) + 1
        pb[v] = pb.get(v, 0) + 1
    return sum(c / n * math.log(c * n / (pa[u] * pb[v])) for (u, v), c in joint.items())
