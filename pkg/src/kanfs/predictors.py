"""Downstream predictors used to score feature subsets.

``linear`` is ridge regression (closed form) or multinomial logistic
regression (gradient descent); ``random_forest`` is bagged CART;
``gradient_boosted_trees`` is stagewise boosting of regression trees on
loss gradients. ``xgboost`` is accepted as an alias of the boosted trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trees import DecisionTree

KINDS = ("linear", "random_forest", "gradient_boosted_trees")
ALIASES = {
    "ridge": "linear", "logreg": "linear", "logistic": "linear",
    "rf": "random_forest", "gbt": "gradient_boosted_trees", "gb": "gradient_boosted_trees",
    "xgboost": "gradient_boosted_trees", "xgb": "gradient_boosted_trees",
}

DEFAULTS = {
    "linear": {"alpha": 1.0, "l2": 1e-3, "iterations": 500, "learning_rate": 0.5},
    "random_forest": {"n_trees": 100, "max_depth": 8, "min_samples_leaf": 1, "max_features": "auto"},
    "gradient_boosted_trees": {"n_trees": 200, "max_depth": 3, "shrinkage": 0.1, "min_samples_leaf": 1},
}


@dataclass
class PredictorSpec:
    name: str
    task: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        kind = self.kind
        unknown = set(self.params) - set(DEFAULTS[kind])
        if unknown:
            raise ValueError(f"unknown {kind} hyperparameters: {sorted(unknown)}")

    @property
    def kind(self) -> str:
        kind = ALIASES.get(self.name, self.name)
        if kind not in KINDS:
            raise ValueError(f"unknown predictor {self.name!r}")
        return kind

    @property
    def hyperparameters(self) -> dict:
        return {**DEFAULTS[self.kind], **self.params}


def _softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


class RidgeModel:
    def __init__(self, alpha=1.0):
        if not alpha > 0:
            raise ValueError("ridge alpha must be > 0")
        self.alpha = alpha

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.x_mean = X.mean(axis=0)
        self.y_mean = y.mean()
        Xc = X - self.x_mean
        A = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        self.coef = np.linalg.solve(A, Xc.T @ (y - self.y_mean))
        self.intercept = self.y_mean - self.x_mean @ self.coef
        return self

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def to_dict(self):
        return {"kind": "ridge", "coef": self.coef.tolist(), "intercept": float(self.intercept)}


class LogisticModel:
    """Multinomial logistic regression trained by full-batch gradient descent."""

    def __init__(self, n_classes, l2=1e-3, iterations=500, learning_rate=0.5):
        self.n_classes = n_classes
        self.l2 = l2
        self.iterations = iterations
        self.learning_rate = learning_rate

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(int)
        n, d = X.shape
        self.mu = X.mean(axis=0)
        sd = np.where(np.ptp(X, axis=0) > 0, X.std(axis=0), 0.0)
        self.sd = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mu) / self.sd
        Y = np.zeros((n, self.n_classes))
        Y[np.arange(n), y] = 1.0
        W = np.zeros((d, self.n_classes))
        b = np.log(Y.mean(axis=0) + 1e-12)
        vW, vb = np.zeros_like(W), np.zeros_like(b)
        for _ in range(self.iterations):
            G = (_softmax(Z @ W + b) - Y) / n
            gW = Z.T @ G + self.l2 * W
            vW = 0.9 * vW - self.learning_rate * gW
            vb = 0.9 * vb - self.learning_rate * G.sum(axis=0)
            W += vW
            b += vb
        self.W, self.b = W, b
        return self

    def predict_proba(self, X):
        Z = (np.asarray(X, dtype=float) - self.mu) / self.sd
        return _softmax(Z @ self.W + self.b)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self):
        return {"kind": "logistic", "W": self.W.tolist(), "b": self.b.tolist(),
                "mu": self.mu.tolist(), "sd": self.sd.tolist()}


def default_max_features(task: str, d: int) -> int:
    if task == "classification":
        return max(1, int(np.sqrt(d)))
    return max(1, d // 3)


class RandomForestModel:
    """Bootstrap-aggregated CART; classification averages leaf class proportions."""

    def __init__(self, task, n_classes=None, n_trees=100, max_depth=8, min_samples_leaf=1,
                 max_features="auto", bootstrap=True, seed=0):
        self.task = task
        self.n_classes = n_classes
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        n, d = X.shape
        mf = self.max_features
        if mf == "auto":
            mf = default_max_features(self.task, d)
        rng = np.random.default_rng(self.seed)
        self.trees = []
        self.bootstrap_indices = []
        for _ in range(self.n_trees):
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.task, self.max_depth, self.min_samples_leaf, mf,
                                self.n_classes, seed=rng.integers(2**63))
            tree.fit(X[idx], y[idx])
            self.trees.append(tree)
            self.bootstrap_indices.append(idx)
        self.feature_importances_ = sum(t.feature_importances_ for t in self.trees)
        return self

    def predict(self, X):
        if self.task == "classification":
            P = sum(t.predict_value(X) for t in self.trees) / len(self.trees)
            return np.argmax(P, axis=1)
        return sum(t.predict_value(X) for t in self.trees) / len(self.trees)

    def to_dict(self):
        return {"kind": "random_forest", "trees": [t.to_dict() for t in self.trees]}


class BoostedTreesModel:
    """Gradient boosting: squared loss, binary log-loss, or softmax log-loss.

    Leaves take a one-step Newton value; ``train_loss_`` records the training
    loss after each round (index 0 is the constant initial model).
    """

    def __init__(self, task, n_classes=None, n_trees=200, max_depth=3, shrinkage=0.1,
                 min_samples_leaf=1, seed=0):
        self.task = task
        self.n_classes = n_classes
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.shrinkage = shrinkage
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed

    def _n_outputs(self):
        if self.task == "regression":
            return 1
        return 1 if self.n_classes == 2 else self.n_classes

    def _loss(self, F, y):
        if self.task == "regression":
            return float(np.mean((y - F[:, 0]) ** 2))
        if self.n_classes == 2:
            f = F[:, 0]
            return float(np.mean(np.logaddexp(0.0, f) - y * f))
        Z = F - F.max(axis=1, keepdims=True)
        logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
        return float(-np.mean(logp[np.arange(len(y)), y]))

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        if self.task == "regression":
            y = np.asarray(y, dtype=float)
            self.init = np.array([y.mean()])
        else:
            y = np.asarray(y).astype(int)
            prior = np.bincount(y, minlength=self.n_classes) / n
            prior = np.clip(prior, 1e-12, 1.0)
            if self.n_classes == 2:
                self.init = np.array([np.log(prior[1] / prior[0])])
            else:
                self.init = np.log(prior)
        K = self._n_outputs()
        F = np.tile(self.init, (n, 1))
        Y = None
        if self.task == "classification" and K > 1:
            Y = np.zeros((n, K))
            Y[np.arange(n), y] = 1.0
        self.stages = []
        self.train_loss_ = [self._loss(F, y)]
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_trees):
            if self.task == "regression":
                residuals = [y - F[:, 0]]
            elif K == 1:
                p = 1.0 / (1.0 + np.exp(-F[:, 0]))
                residuals = [y - p]
            else:
                residuals = list((Y - _softmax(F)).T)
            stage = []
            for k, r in enumerate(residuals):
                tree = DecisionTree("regression", self.max_depth, self.min_samples_leaf,
                                    seed=rng.integers(2**63)).fit(X, r)
                if self.task == "classification":
                    self._newton_leaves(tree, X, r, K)
                F[:, k] += self.shrinkage * tree.predict_value(X)
                stage.append(tree)
            self.stages.append(stage)
            self.train_loss_.append(self._loss(F, y))
        return self

    @staticmethod
    def _newton_leaves(tree, X, r, K):
        leaves = tree.apply(X)
        num = np.bincount(leaves, weights=r, minlength=tree.value.shape[0])
        # |r|(1-|r|) equals p(1-p) for 0/1 targets
        h = np.abs(r) * (1.0 - np.abs(r))
        scale = 1.0 if K == 1 else (K - 1) / K
        den = np.bincount(leaves, weights=h, minlength=tree.value.shape[0])
        gamma = np.where(den > 1e-12, scale * num / np.maximum(den, 1e-12), 0.0)
        is_leaf = tree.feature < 0
        tree.value[is_leaf, 0] = gamma[is_leaf]

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        F = np.tile(self.init, (X.shape[0], 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                F[:, k] += self.shrinkage * tree.predict_value(X)
        return F

    def predict(self, X):
        F = self.decision_function(X)
        if self.task == "regression":
            return F[:, 0]
        if F.shape[1] == 1:
            return (F[:, 0] > 0).astype(int)
        return np.argmax(F, axis=1)

    def to_dict(self):
        return {"kind": "gradient_boosted_trees", "init": self.init.tolist(),
                "shrinkage": self.shrinkage,
                "stages": [[t.to_dict() for t in stage] for stage in self.stages]}


def build(spec: PredictorSpec, n_classes: int | None = None):
    hp = spec.hyperparameters
    kind = spec.kind
    if kind == "linear":
        if spec.task == "regression":
            return RidgeModel(hp["alpha"])
        return LogisticModel(n_classes, hp["l2"], hp["iterations"], hp["learning_rate"])
    if kind == "random_forest":
        return RandomForestModel(spec.task, n_classes, hp["n_trees"], hp["max_depth"],
                                 hp["min_samples_leaf"], hp["max_features"], seed=spec.seed)
    return BoostedTreesModel(spec.task, n_classes, hp["n_trees"], hp["max_depth"],
                             hp["shrinkage"], hp["min_samples_leaf"], seed=spec.seed)


def fit(spec: PredictorSpec, X, y, n_classes: int | None = None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if spec.task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    return build(spec, n_classes).fit(X, y)


def predict(model, X) -> np.ndarray:
    return model.predict(X)
