"""Kolmogorov-Arnold network layers with a base activation path and B-spline edges.

A layer maps ``x in R^d`` to ``R^m`` as::

    y = W_base @ phi(x) + sum_j W_spline[:, j, :] @ b_j(x_j)

which in batch form is ``Phi(X) W_base^T + B(X) W_spline^T`` with ``B(X)``
the ``(n, d*K)`` concatenated basis expansion. Models stack one or two layers;
classification models emit raw logits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spline import KnotVector, basis_tensor, build_knots, knots_for_column

TASKS = ("regression", "classification")


class TrainingDivergedError(ArithmeticError):
    pass


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _silu(x):
    return x * _sigmoid(x)


def _silu_grad(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


ACTIVATIONS = {
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
    "silu": (_silu, _silu_grad),
}


@dataclass(eq=False)
class KanLayer:
    w_base: np.ndarray     # (m, d)
    w_spline: np.ndarray   # (m, d, K); block j is w_spline[:, j, :]
    knots: tuple
    activation: str = "silu"

    def __post_init__(self):
        self.w_base = np.asarray(self.w_base, dtype=float)
        self.w_spline = np.asarray(self.w_spline, dtype=float)
        self.knots = tuple(self.knots)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        m, d = self.w_base.shape
        if self.w_spline.ndim != 3 or self.w_spline.shape[:2] != (m, d):
            raise ValueError(
                f"spline weights {self.w_spline.shape} do not match base weights {(m, d)}")
        if len(self.knots) != d:
            raise ValueError(f"{len(self.knots)} knot vectors for {d} inputs")
        if any(kv.n_basis != self.w_spline.shape[2] for kv in self.knots):
            raise ValueError("knot vectors disagree with the spline block width")

    @property
    def in_dim(self) -> int:
        return self.w_base.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w_base.shape[0]

    @property
    def n_basis(self) -> int:
        return self.w_spline.shape[2]

    @property
    def spline_matrix(self) -> np.ndarray:
        """The flattened ``(m, d*K)`` spline weight matrix."""
        m, d, K = self.w_spline.shape
        return self.w_spline.reshape(m, d * K)

    def copy(self) -> "KanLayer":
        return KanLayer(self.w_base.copy(), self.w_spline.copy(), self.knots, self.activation)

    def __eq__(self, other):
        if not isinstance(other, KanLayer):
            return NotImplemented
        return (self.activation == other.activation
                and self.knots == other.knots
                and np.array_equal(self.w_base, other.w_base)
                and np.array_equal(self.w_spline, other.w_spline))


@dataclass(eq=False)
class KanModel:
    layers: tuple
    task: str = "regression"
    n_classes: int | None = None

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not 1 <= len(self.layers) <= 2:
            raise ValueError("a model has one or two layers")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError("adjacent layer dimensions do not compose")
        expected = self.n_classes if self.task == "classification" else 1
        if self.task == "classification" and (self.n_classes is None or self.n_classes < 2):
            raise ValueError("classification needs n_classes >= 2")
        if self.layers[-1].out_dim != expected:
            raise ValueError(f"output dimension {self.layers[-1].out_dim} != {expected}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "KanModel":
        return KanModel(tuple(l.copy() for l in self.layers), self.task, self.n_classes)

    def parameters(self) -> list:
        return [a for layer in self.layers for a in (layer.w_base, layer.w_spline)]

    def __eq__(self, other):
        if not isinstance(other, KanModel):
            return NotImplemented
        return (self.task == other.task and self.n_classes == other.n_classes
                and len(self.layers) == len(other.layers)
                and all(a == b for a, b in zip(self.layers, other.layers)))


@dataclass
class LayerTrace:
    inputs: np.ndarray
    phi: np.ndarray
    basis: np.ndarray
    dbasis: np.ndarray
    outputs: np.ndarray


@dataclass
class ForwardTrace:
    layers: list = field(default_factory=list)

    @property
    def preactivations(self) -> np.ndarray:
        """Outputs of the first layer (the inner sums feeding the second layer)."""
        return self.layers[0].outputs


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 0.1
    batch_size: int | None = None
    l2_penalty: float = 0.0
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def init_layer(knots: Sequence[KnotVector], out_dim: int, activation: str = "silu",
               rng: np.random.Generator | None = None) -> KanLayer:
    rng = np.random.default_rng(rng)
    d = len(knots)
    K = knots[0].n_basis
    bound = 1.0 / np.sqrt(d)
    w_base = rng.uniform(-bound, bound, size=(out_dim, d))
    w_spline = rng.uniform(-1.0, 1.0, size=(out_dim, d, K)) * (0.1 / np.sqrt(K))
    return KanLayer(w_base, w_spline, tuple(knots), activation)


def init_model(X, task: str = "regression", n_classes: int | None = None, hidden: int | None = None,
               degree: int = 3, grid_size: int = 5, activation: str = "silu",
               hidden_domain: tuple = (-3.0, 3.0), seed: int = 0) -> KanModel:
    """Randomly initialised model whose first-layer knots span the columns of ``X``.

    ``hidden`` adds a second layer (``d -> hidden -> out``); pass ``"auto"``
    for ``2d + 1`` hidden units. Hidden-layer knots cover ``hidden_domain``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    out = n_classes if task == "classification" else 1
    first_knots = [knots_for_column(X[:, j], grid_size, degree) for j in range(d)]
    if hidden is None:
        layers = [init_layer(first_knots, out, activation, rng)]
    else:
        h = 2 * d + 1 if hidden == "auto" else int(hidden)
        kv = build_knots(hidden_domain[0], hidden_domain[1], grid_size, degree)
        layers = [init_layer(first_knots, h, activation, rng),
                  init_layer([kv] * h, out, activation, rng)]
    return KanModel(tuple(layers), task, n_classes)


def _layer_forward(layer: KanLayer, x: np.ndarray, basis=None) -> LayerTrace:
    act, _ = ACTIVATIONS[layer.activation]
    phi = act(x)
    if basis is None:
        basis = basis_tensor(layer.knots, x)
    B, dB = basis
    n = x.shape[0]
    out = phi @ layer.w_base.T + B.reshape(n, -1) @ layer.spline_matrix.T
    return LayerTrace(x, phi, B, dB, out)


def _check_input(model: KanModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ValueError(f"dimension mismatch: model expects {model.in_dim} columns, got {X.shape}")
    return X


def forward(model: KanModel, X, first_basis=None):
    """Return ``(Y, trace)``; ``first_basis`` may carry a precomputed layer-1 ``(B, dB)``."""
    x = _check_input(model, X)
    trace = ForwardTrace()
    for i, layer in enumerate(model.layers):
        lt = _layer_forward(layer, x, first_basis if i == 0 else None)
        trace.layers.append(lt)
        x = lt.outputs
    return x, trace


def predict(model: KanModel, X) -> np.ndarray:
    Y, _ = forward(model, X)
    if model.task == "classification":
        return np.argmax(Y, axis=1)
    return Y[:, 0]


def _check_targets(model: KanModel, y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[0] != n:
        raise ValueError(f"length mismatch: {y.shape[0]} targets for {n} rows")
    if model.task == "classification":
        yi = y.astype(int)
        if np.any(yi != y) or np.any(yi < 0) or np.any(yi >= model.n_classes):
            raise ValueError(f"label out of range: labels must be integers in [0, {model.n_classes})")
        return yi
    return y.astype(float)


def _log_softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


def _loss_from_outputs(model: KanModel, Y: np.ndarray, y: np.ndarray):
    """Task loss and its gradient with respect to the outputs."""
    n = Y.shape[0]
    if model.task == "regression":
        err = Y[:, 0] - y
        return float(np.mean(err ** 2)), (2.0 / n) * err[:, None]
    logp = _log_softmax(Y)
    rows = np.arange(n)
    G = np.exp(logp)
    G[rows, y] -= 1.0
    return float(-np.mean(logp[rows, y])), G / n


def _penalty(model: KanModel, l2_penalty: float) -> float:
    if l2_penalty == 0:
        return 0.0
    return l2_penalty * sum(float(np.sum(p ** 2)) for p in model.parameters())


def loss(model: KanModel, X, y, l2_penalty: float = 0.0) -> float:
    """Mean squared error (regression) or mean softmax cross-entropy (classification)."""
    Y, _ = forward(model, X)
    y = _check_targets(model, y, Y.shape[0])
    value, _ = _loss_from_outputs(model, Y, y)
    return value + _penalty(model, l2_penalty)


def _backprop(model: KanModel, trace: ForwardTrace, G: np.ndarray, need_input: bool = False):
    grads = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        lt = trace.layers[i]
        g_base = G.T @ lt.phi
        g_spline = np.einsum("nm,ndk->mdk", G, lt.basis)
        grads[i] = {"w_base": g_base, "w_spline": g_spline}
        if i > 0 or need_input:
            _, dact = ACTIVATIONS[layer.activation]
            G = (G @ layer.w_base) * dact(lt.inputs) + np.einsum(
                "nm,mdk,ndk->nd", G, layer.w_spline, lt.dbasis)
    return grads, G


def loss_and_grad(model: KanModel, X, y, l2_penalty: float = 0.0, first_basis=None):
    Y, trace = forward(model, X, first_basis)
    y = _check_targets(model, y, Y.shape[0])
    value, G = _loss_from_outputs(model, Y, y)
    grads, _ = _backprop(model, trace, G)
    if l2_penalty:
        for layer, g in zip(model.layers, grads):
            g["w_base"] += 2.0 * l2_penalty * layer.w_base
            g["w_spline"] += 2.0 * l2_penalty * layer.w_spline
    return value + _penalty(model, l2_penalty), grads


def backward(model: KanModel, X, y, l2_penalty: float = 0.0) -> list:
    """Analytic loss gradients: one ``{"w_base", "w_spline"}`` dict per layer."""
    return loss_and_grad(model, X, y, l2_penalty)[1]


def input_gradients(model: KanModel, X) -> np.ndarray:
    """Per-sample gradient of the model output with respect to each input column.

    For classifiers the differentiated output is the largest logit of each row.
    """
    X = _check_input(model, X)
    Y, trace = forward(model, X)
    if model.task == "classification":
        G = np.zeros_like(Y)
        G[np.arange(Y.shape[0]), np.argmax(Y, axis=1)] = 1.0
    else:
        G = np.ones_like(Y)
    _, dX = _backprop(model, trace, G, need_input=True)
    return dX


def train(model: KanModel, X, y, cfg: TrainConfig | None = None):
    """Gradient descent with optional momentum.

    Returns the iterate with the lowest full-data training loss and the
    per-epoch loss history (``history[0]`` is the initial loss).
    """
    cfg = cfg or TrainConfig()
    X = _check_input(model, X)
    y = _check_targets(model, y, X.shape[0])
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    model = model.copy()
    first_basis = basis_tensor(model.layers[0].knots, X)
    velocity = [np.zeros_like(p) for p in model.parameters()]
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)

    current, grads = loss_and_grad(model, X, y, cfg.l2_penalty, first_basis)
    history = [current]
    best, best_loss = model.copy(), current
    for epoch in range(cfg.epochs):
        if batch < n:
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                fb = (first_basis[0][idx], first_basis[1][idx])
                _, g = loss_and_grad(model, X[idx], y[idx], cfg.l2_penalty, fb)
                _step(model, g, velocity, cfg)
        else:
            _step(model, grads, velocity, cfg)
        current, grads = loss_and_grad(model, X, y, cfg.l2_penalty, first_basis)
        if not np.isfinite(current):
            raise TrainingDivergedError(
                f"non-finite training loss at epoch {epoch + 1} "
                f"(learning_rate={cfg.learning_rate}); lower the learning rate")
        history.append(current)
        if current < best_loss:
            best, best_loss = model.copy(), current
    return best, np.asarray(history)


def _step(model: KanModel, grads, velocity, cfg: TrainConfig):
    flat = [g[k] for g in grads for k in ("w_base", "w_spline")]
    for p, g, v in zip(model.parameters(), flat, velocity):
        v *= cfg.momentum
        v -= cfg.learning_rate * g
        p += v


# -- serialization ---------------------------------------------------------

def model_to_dict(model: KanModel) -> dict:
    return {
        "format": "kan-model",
        "version": 1,
        "task": model.task,
        "n_classes": model.n_classes,
        "layers": [
            {
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "n_basis": layer.n_basis,
                "degree": layer.knots[0].degree,
                "activation": layer.activation,
                "knots": [kv.knots.tolist() for kv in layer.knots],
                "w_base": layer.w_base.tolist(),
                "w_spline": layer.w_spline.tolist(),
            }
            for layer in model.layers
        ],
    }


def model_from_dict(doc: dict) -> KanModel:
    if doc.get("format") != "kan-model":
        raise ValueError("not a kan-model document")
    layers = []
    for ld in doc["layers"]:
        knots = tuple(KnotVector(np.array(k, dtype=float), ld["degree"]) for k in ld["knots"])
        layers.append(KanLayer(np.array(ld["w_base"], dtype=float).reshape(ld["out_dim"], ld["in_dim"]),
                               np.array(ld["w_spline"], dtype=float).reshape(
                                   ld["out_dim"], ld["in_dim"], ld["n_basis"]),
                               knots, ld["activation"]))
    return KanModel(tuple(layers), doc["task"], doc.get("n_classes"))


def model_to_json(model: KanModel) -> str:
    return json.dumps(model_to_dict(model), indent=1)


def model_from_json(text: str) -> KanModel:
    return model_from_dict(json.loads(text))
