"""Scoring functions for the benchmark: macro-F1 and R^2."""

import numpy as np


def macro_f1(y_true, y_pred, n_classes: int | None = None) -> float:
    """Unweighted mean of one-vs-rest F1 over classes ``0..C-1``.

    A class with no true and no predicted members contributes 0.
    """
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty label arrays")
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    if y_true.min() < 0 or y_pred.min() < 0 or max(y_true.max(), y_pred.max()) >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    f1 = np.empty(n_classes)
    for c in range(n_classes):
        tp = np.sum((y_true == c) & (y_pred == c))
        fp = np.sum((y_true != c) & (y_pred == c))
        fn = np.sum((y_true == c) & (y_pred != c))
        denom = 2 * tp + fp + fn
        f1[c] = 2 * tp / denom if denom else 0.0
    return float(f1.mean())


def r2(y_true, y_pred) -> float:
    """Coefficient of determination; a constant target scores 1 if matched exactly, else 0."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty target arrays")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def task_score(task: str, y_true, y_pred, n_classes: int | None = None) -> float:
    if task == "classification":
        return macro_f1(y_true, y_pred, n_classes)
    return r2(y_true, y_pred)
