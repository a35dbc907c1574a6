"""Classical feature selectors: mutual information, LASSO, random-forest MDI,
SVM-RFE and random-forest permutation importance.

Every selector returns an :class:`~kanfs.importance.ImportanceVector`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .importance import ImportanceVector, normalize
from .metrics import task_score
from .predictors import RandomForestModel, default_max_features

SELECTOR_KINDS = ("mi", "lasso", "rf_importance", "svm_rfe", "permutation_rf",
                  "kan_l1", "kan_l2", "kan_ko", "kan_si")
KAN_SELECTORS = ("kan_l1", "kan_l2", "kan_ko", "kan_si")

SELECTOR_DEFAULTS = {
    "mi": {"n_bins": 8},
    "lasso": {"lam": None, "n_lambdas": 10, "cv_folds": 3, "tol": 1e-8, "max_sweeps": 10_000},
    "rf_importance": {"n_trees": 100, "max_depth": 8, "min_samples_leaf": 1},
    "svm_rfe": {"step_fraction": 0.1, "C": 1.0, "iterations": 300, "ridge_alpha": 1.0},
    "permutation_rf": {"n_repeats": 5, "holdout_fraction": 0.2, "n_trees": 100, "max_depth": 8},
    "kan_l1": {"include_base": True},
    "kan_l2": {"include_base": True},
    "kan_ko": {"delta": 1e-12},
    "kan_si": {"scale": "std"},
}


@dataclass
class SelectorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector {self.kind!r}; expected one of {SELECTOR_KINDS}")
        unknown = set(self.hyperparameters) - set(SELECTOR_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")

    @property
    def params(self) -> dict:
        return {**SELECTOR_DEFAULTS[self.kind], **self.hyperparameters}


def _standardize(X):
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = np.where(np.ptp(X, axis=0) > 0, X.std(axis=0), 0.0)
    return (X - mu) / np.where(sd > 0, sd, 1.0), sd > 0


# -- mutual information ----------------------------------------------------

def equal_frequency_bins(x, n_bins: int = 8) -> np.ndarray:
    """Integer bin codes from sample quantiles; tied values share a bin."""
    x = np.asarray(x, dtype=float)
    edges = np.unique(np.quantile(x, np.linspace(0, 1, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, x, side="right")


def plugin_mutual_information(a, b) -> float:
    """Plug-in MI (nats) between two integer-coded variables."""
    a = np.unique(a, return_inverse=True)[1]
    b = np.unique(b, return_inverse=True)[1]
    na, nb = a.max() + 1, b.max() + 1
    joint = np.bincount(a * nb + b, minlength=na * nb).reshape(na, nb) / a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def mi_rank(X, y, task: str, n_bins: int = 8) -> ImportanceVector:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] < 10:
        raise ValueError("mutual information ranking needs at least 10 rows")
    if task == "classification":
        y_codes = y.astype(int)
    else:
        y_codes = equal_frequency_bins(y, n_bins)
    if np.unique(y_codes).size < 2:
        return normalize(np.zeros(X.shape[1]), "mi", info={"degenerate": "constant target"})
    raw = np.array([max(0.0, plugin_mutual_information(equal_frequency_bins(X[:, j], n_bins), y_codes))
                    for j in range(X.shape[1])])
    return normalize(raw, "mi", config={"n_bins": n_bins})


# -- LASSO -----------------------------------------------------------------

def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_coordinate_descent(X, y, lam: float, tol: float = 1e-8, max_sweeps: int = 10_000,
                             beta0=None):
    """Minimise ``||y - X b||^2 / (2n) + lam * ||b||_1`` by cyclic coordinate descent.

    No intercept; centre the data first. Returns ``(beta, converged, sweeps)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    col_sq = (X ** 2).sum(axis=0) / n
    beta = np.zeros(d) if beta0 is None else np.array(beta0, dtype=float)
    r = y - X @ beta
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            old = beta[j]
            rho = X[:, j] @ r / n + old * col_sq[j]
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                r -= X[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            return beta, True, sweep
    return beta, False, max_sweeps


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def l1_logistic(X, y, lam: float, tol: float = 1e-8, max_sweeps: int = 10_000):
    """L1-penalised binary logistic regression with an unpenalised intercept.

    Proximal Newton: each outer step builds the weighted least-squares
    approximation of the log-likelihood and solves it by coordinate descent.
    Returns ``(intercept, beta, converged)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    beta = np.zeros(d)
    p0 = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    b0 = np.log(p0 / (1 - p0))
    sweeps = 0
    while sweeps < max_sweeps:
        eta = b0 + X @ beta
        p = _sigmoid(eta)
        w = np.maximum(p * (1 - p), 1e-5)
        z = eta + (y - p) / w
        old_b0, old_beta = b0, beta.copy()
        r = z - b0 - X @ beta
        wx_sq = (w[:, None] * X ** 2).sum(axis=0) / n
        while sweeps < max_sweeps:
            sweeps += 1
            change = 0.0
            step = (w @ r) / w.sum()
            b0 += step
            r -= step
            change = abs(step)
            for j in range(d):
                if wx_sq[j] == 0:
                    continue
                old = beta[j]
                rho = (w * X[:, j]) @ r / n + old * wx_sq[j]
                new = soft_threshold(rho, lam) / wx_sq[j]
                if new != old:
                    r -= X[:, j] * (new - old)
                    beta[j] = new
                    change = max(change, abs(new - old))
            if change < tol:
                break
        if max(abs(b0 - old_b0), np.max(np.abs(beta - old_beta), initial=0.0)) < tol:
            return b0, beta, True
    return b0, beta, False


def _kfold(n, k, rng):
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def _lasso_fit(Z, y, task, lam, n_classes, tol, max_sweeps):
    """Coefficient matrix ``(d, n_models)`` and intercepts for one penalty."""
    if task == "regression":
        yc = y - y.mean()
        beta, ok, _ = lasso_coordinate_descent(Z, yc, lam, tol, max_sweeps)
        return beta[:, None], np.array([y.mean()]), ok
    targets = [y == 1] if n_classes == 2 else [y == c for c in range(n_classes)]
    coefs, icpts, ok_all = [], [], True
    for t in targets:
        b0, beta, ok = l1_logistic(Z, t.astype(float), lam, tol, max_sweeps)
        coefs.append(beta)
        icpts.append(b0)
        ok_all &= ok
    return np.column_stack(coefs), np.array(icpts), ok_all


def _lambda_max(Z, y, task, n_classes):
    n = Z.shape[0]
    if task == "regression":
        return float(np.max(np.abs(Z.T @ (y - y.mean()))) / n)
    classes = [1] if n_classes == 2 else range(n_classes)
    return float(max(np.max(np.abs(Z.T @ ((y == c) - np.mean(y == c)))) / n for c in classes))


def _cv_loss(Z, y, task, coef, icpt, n_classes):
    eta = Z @ coef + icpt
    if task == "regression":
        return float(np.mean((y - eta[:, 0]) ** 2))
    if n_classes == 2:
        t = (y == 1).astype(float)
        return float(np.mean(np.logaddexp(0, eta[:, 0]) - t * eta[:, 0]))
    T = (y[:, None] == np.arange(n_classes)).astype(float)
    return float(np.mean(np.logaddexp(0, eta) - T * eta))


def lasso_select(X, y, lam: float | None = None, task: str = "regression",
                 n_classes: int | None = None, n_lambdas: int = 10, cv_folds: int = 3,
                 tol: float = 1e-8, max_sweeps: int = 10_000, seed: int = 0) -> ImportanceVector:
    """LASSO importance ``|coef|`` (summed over one-vs-rest models) on standardised columns.

    ``lam=None`` picks the penalty by internal cross-validation over a
    logarithmic grid from ``lambda_max`` down to ``1e-3 * lambda_max``.
    """
    Z, _ = _standardize(X)
    y = np.asarray(y)
    if task == "classification":
        y = y.astype(int)
        n_classes = n_classes or int(y.max()) + 1
    else:
        y = y.astype(float)
    info = {}
    if lam is None:
        lmax = _lambda_max(Z, y, task, n_classes)
        grid = lmax * np.logspace(0, -3, n_lambdas)
        rng = np.random.default_rng(seed)
        folds = _kfold(Z.shape[0], cv_folds, rng)
        cv = np.zeros(n_lambdas)
        for val in folds:
            tr = np.setdiff1d(np.arange(Z.shape[0]), val)
            Ztr, Zval = _standardize_pair(Z[tr], Z[val])
            for i, lam_i in enumerate(grid):
                coef, icpt, _ = _lasso_fit(Ztr, y[tr], task, lam_i, n_classes, 1e-6, 1000)
                cv[i] += _cv_loss(Zval, y[val], task, coef, icpt, n_classes)
        lam = float(grid[int(np.argmin(cv))])
        info["lambda_grid"] = grid.tolist()
        info["cv_loss"] = (cv / cv_folds).tolist()
    coef, icpt, converged = _lasso_fit(Z, y, task, lam, n_classes, tol, max_sweeps)
    info.update({"lambda": lam, "coef": coef.T.tolist(), "intercept": icpt.tolist(),
                 "converged": bool(converged)})
    return normalize(np.abs(coef).sum(axis=1), "lasso", config={"lam": lam}, info=info)


def _standardize_pair(A, B):
    mu = A.mean(axis=0)
    sd = np.where(np.ptp(A, axis=0) > 0, A.std(axis=0), 0.0)
    sd = np.where(sd > 0, sd, 1.0)
    return (A - mu) / sd, (B - mu) / sd


# -- random forest ---------------------------------------------------------

def rf_importance(X, y, task: str, n_classes: int | None = None, n_trees: int = 100,
                  max_depth: int = 8, min_samples_leaf: int = 1, seed: int = 0) -> ImportanceVector:
    """Mean decrease in impurity (Gini or variance), accumulated over a bagged forest."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if task == "classification":
        n_classes = n_classes or int(y.max()) + 1
    forest = RandomForestModel(task, n_classes, n_trees, max_depth, min_samples_leaf,
                               default_max_features(task, X.shape[1]), seed=seed).fit(X, y)
    return normalize(forest.feature_importances_, "rf_importance",
                     config={"n_trees": n_trees, "max_depth": max_depth})


# -- SVM-RFE ---------------------------------------------------------------

def linear_svm(X, y, C: float = 1.0, iterations: int = 300):
    """Soft-margin linear SVM (labels in {-1, +1}) by deterministic subgradient descent.

    Minimises ``||w||^2 / 2 + C * mean(hinge)`` with step ``1 / t`` and
    returns the averaged iterate ``(w, b)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    w, b = np.zeros(d), 0.0
    w_avg, b_avg = np.zeros(d), 0.0
    for t in range(1, iterations + 1):
        margin = y * (X @ w + b)
        active = margin < 1
        gw = w - C * (y[active] @ X[active]) / n
        gb = -C * y[active].sum() / n
        eta = 1.0 / t
        w = w - eta * gw
        b = b - eta * gb
        w_avg += (w - w_avg) / t
        b_avg += (b - b_avg) / t
    return w_avg, b_avg


def _ridge_coef(X, y, alpha):
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    return np.linalg.solve(Xc.T @ Xc + alpha * np.eye(X.shape[1]), Xc.T @ yc)


def _rfe_criterion(Z, y, task, n_classes, C, iterations, ridge_alpha):
    if task == "regression":
        return _ridge_coef(Z, y, ridge_alpha) ** 2
    classes = [1] if n_classes == 2 else range(n_classes)
    crit = np.zeros(Z.shape[1])
    for c in classes:
        w, _ = linear_svm(Z, np.where(y == c, 1.0, -1.0), C, iterations)
        crit += w ** 2
    return crit


def svm_rfe(X, y, task: str = "classification", n_classes: int | None = None,
            step_fraction: float = 0.1, C: float = 1.0, iterations: int = 300,
            ridge_alpha: float = 1.0) -> ImportanceVector:
    """Recursive elimination on squared linear weights; score is the normalised survival rank.

    Each round removes ``max(1, floor(step_fraction * d))`` of the weakest
    surviving features. Regression uses ridge coefficients in place of the SVM.
    """
    Z, _ = _standardize(X)
    y = np.asarray(y)
    if task == "classification":
        y = y.astype(int)
        n_classes = n_classes or int(y.max()) + 1
    else:
        y = y.astype(float)
    d = Z.shape[1]
    step = max(1, int(step_fraction * d))
    surviving = list(range(d))
    eliminated = []
    while len(surviving) > 1:
        crit = _rfe_criterion(Z[:, surviving], y, task, n_classes, C, iterations, ridge_alpha)
        order = np.lexsort((np.arange(len(surviving)), crit))
        drop = order[: min(step, len(surviving) - 1)].tolist()
        eliminated.extend(surviving[i] for i in drop)
        surviving = [f for i, f in enumerate(surviving) if i not in set(drop)]
    eliminated.extend(surviving)
    ranks = np.empty(d)
    ranks[eliminated] = np.arange(1, d + 1)
    return normalize(ranks, "svm_rfe", config={"step_fraction": step_fraction},
                     info={"elimination_order": eliminated})


# -- permutation importance ------------------------------------------------

def permutation_importance(X, y, task: str, n_classes: int | None = None, n_repeats: int = 5,
                           holdout_fraction: float = 0.2, n_trees: int = 100, max_depth: int = 8,
                           seed: int = 0) -> ImportanceVector:
    """Drop in held-out score when one column is shuffled, for an internal random forest.

    The forest trains on a seeded sub-split and is scored on the rest; each
    repeat's drop is clamped at zero before averaging.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if task == "classification":
        y = y.astype(int)
        n_classes = n_classes or int(y.max()) + 1
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    perm = rng.permutation(n)
    n_hold = max(1, int(round(holdout_fraction * n)))
    hold, fit_idx = np.sort(perm[:n_hold]), np.sort(perm[n_hold:])
    forest = RandomForestModel(task, n_classes, n_trees, max_depth,
                               max_features=default_max_features(task, X.shape[1]),
                               seed=int(rng.integers(2**31))).fit(X[fit_idx], y[fit_idx])
    Xh, yh = X[hold], y[hold]
    baseline = task_score(task, yh, forest.predict(Xh), n_classes)
    raw = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        drops = []
        for _ in range(n_repeats):
            Xp = Xh.copy()
            Xp[:, j] = Xh[rng.permutation(n_hold), j]
            drops.append(max(0.0, baseline - task_score(task, yh, forest.predict(Xp), n_classes)))
        raw[j] = np.mean(drops)
    return normalize(raw, "permutation_rf", config={"n_repeats": n_repeats},
                     info={"baseline_score": baseline})
