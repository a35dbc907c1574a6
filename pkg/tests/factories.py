"""Seeded random models and data shared across test modules."""

import numpy as np

from kanfs import kan


def random_model(seed, d=4, m=3, grid_size=5, degree=3, depth=1, task="regression",
                 n_classes=None, activation="silu", scale=1.0):
    """A KAN with random (not trained) weights; ``m`` is the hidden width for depth 2."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, d))
    model = kan.init_model(X, task, n_classes, hidden=m if depth == 2 else None, degree=degree,
                           grid_size=grid_size, activation=activation, seed=seed)
    for layer in model.layers:
        layer.w_spline[...] = rng.normal(scale=scale, size=layer.w_spline.shape)
        layer.w_base[...] = rng.normal(scale=scale, size=layer.w_base.shape)
    return model, X


def targets(model, X, seed):
    rng = np.random.default_rng(seed)
    if model.task == "classification":
        return rng.integers(0, model.n_classes, size=X.shape[0])
    return rng.normal(size=X.shape[0])
