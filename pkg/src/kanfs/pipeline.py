"""Leakage-safe selection-to-prediction protocol.

For every fold ``(T_f, V_f)``: preprocessing and all selectors are fitted on
``T_f`` only, each importance vector is cut to its top ``n_k`` source
features, predictors train on the projected ``T_f`` and are scored on the
projected ``V_f``. KAN selectors train on 80% of ``T_f`` and evaluate the
knockout and sensitivity measures on the remaining 20%.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import baselines, importance
from . import kan as kanlib
from . import predictors as predlib
from .baselines import KAN_SELECTORS, SelectorSpec
from .data import Dataset
from .importance import ImportanceVector, SensitivityConfig
from .metrics import task_score
from .predictors import PredictorSpec
from .report import ALL_FEATURES, ALL_FEATURES_RETENTION, BenchmarkReport, ScoreCell

DEFAULT_RETENTIONS = (20, 40, 60)
DEFAULT_SELECTORS = ("kan_l1", "kan_l2", "kan_ko", "kan_si", "lasso", "mi",
                     "rf_importance", "svm_rfe", "permutation_rf")
DEFAULT_PREDICTORS = ("linear", "random_forest", "gradient_boosted_trees")


# -- folds, retention, projection ------------------------------------------

@dataclass
class FoldPlan:
    n: int
    folds: list          # [(train_idx, val_idx), ...]
    seed: int
    stratified: bool

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def plan_folds(n: int, F: int = 5, task: str = "regression", seed: int = 0, y=None) -> FoldPlan:
    """Seeded F-fold partition; stratified by class when ``task`` is classification."""
    if F < 2:
        raise ValueError(f"need at least 2 folds, got {F}")
    if n < F:
        raise ValueError(f"too few samples: n={n} < F={F}")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=int)
    stratified = task == "classification"
    if stratified:
        if y is None:
            raise ValueError("stratified folds need the labels")
        y = np.asarray(y)
        offset = 0
        for c in np.unique(y):
            members = rng.permutation(np.nonzero(y == c)[0])
            # continue the round-robin across classes so fold sizes stay balanced
            assign[members] = (offset + np.arange(members.size)) % F
            offset += members.size
    else:
        assign[rng.permutation(n)] = np.arange(n) % F
    folds = []
    for f in range(F):
        val = np.nonzero(assign == f)[0]
        train = np.nonzero(assign != f)[0]
        folds.append((train, val))
    return FoldPlan(n, folds, seed, stratified)


def retention_count(k_percent, d: int) -> int:
    """``max(1, ceil(k * d / 100))`` in exact arithmetic."""
    k = Fraction(str(k_percent))
    if not 0 < k <= 100:
        raise ValueError(f"retention must lie in (0, 100], got {k_percent}")
    return max(1, math.ceil(k * d / 100))


def top_k(scores, n_k: int) -> np.ndarray:
    """Indices of the ``n_k`` largest scores, ascending; ties go to the lower index."""
    if isinstance(scores, ImportanceVector):
        scores = scores.scores
    scores = np.asarray(scores, dtype=float)
    if not 1 <= n_k <= scores.size:
        raise ValueError(f"n_k={n_k} out of range for {scores.size} features")
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:n_k])


def project(X, J) -> np.ndarray:
    return np.asarray(X)[:, np.sort(np.asarray(J, dtype=int))]


def encoded_columns(groups, J) -> np.ndarray:
    """Encoded columns belonging to the selected source features ``J``."""
    return np.nonzero(np.isin(np.asarray(groups), np.asarray(J, dtype=int)))[0]


# -- preprocessing ---------------------------------------------------------

class Standardizer:
    """Z-scores the numeric columns with statistics from the data it was fitted on."""

    def __init__(self, numeric_mask=None):
        self.numeric_mask = numeric_mask

    def fit(self, X):
        X = np.asarray(X, dtype=float)
        mask = np.ones(X.shape[1], bool) if self.numeric_mask is None else np.asarray(self.numeric_mask)
        self.mean_ = np.where(mask, X.mean(axis=0), 0.0)
        sd = np.where(np.ptp(X, axis=0) > 0, X.std(axis=0), 0.0)
        self.scale_ = np.where(mask & (sd > 0), sd, 1.0)
        return self

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean_) / self.scale_


# -- KAN selectors ---------------------------------------------------------

@dataclass
class KanSelectorConfig:
    hidden: int | str | None = None
    degree: int = 3
    grid_size: int = 5
    activation: str = "silu"
    epochs: int = 300
    learning_rate: float = 0.1
    momentum: float = 0.9
    l2_penalty: float = 1e-3
    batch_size: int | None = None
    holdout_fraction: float = 0.2
    include_base: bool = True
    si_scale: str = "std"
    delta: float = 1e-12


def inner_split(n: int, fraction: float, seed: int, y=None):
    """Seeded ``(fit_idx, eval_idx)`` split, stratified when labels are given."""
    rng = np.random.default_rng(seed)
    if y is None:
        perm = rng.permutation(n)
        n_eval = max(1, int(round(fraction * n)))
        return np.sort(perm[n_eval:]), np.sort(perm[:n_eval])
    eval_idx = []
    for c in np.unique(y):
        members = rng.permutation(np.nonzero(y == c)[0])
        eval_idx.extend(members[:int(round(fraction * members.size))].tolist())
    eval_idx = np.sort(np.array(eval_idx, dtype=int))
    return np.setdiff1d(np.arange(n), eval_idx), eval_idx


def fit_kan_selector(X, y, task: str, n_classes: int | None, cfg: KanSelectorConfig, seed: int = 0):
    """Train a KAN on an inner split; returns ``(model, X_eval, y_eval, history)``.

    Regression targets are z-scored with the fit-split statistics so the
    learning rate is scale-free.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    fit_idx, eval_idx = inner_split(X.shape[0], cfg.holdout_fraction, seed,
                                    y if task == "classification" else None)
    if task == "regression":
        y = y.astype(float)
        mu, sd = y[fit_idx].mean(), y[fit_idx].std()
        y = (y - mu) / (sd if sd > 0 else 1.0)
    model = kanlib.init_model(X[fit_idx], task, n_classes, cfg.hidden, cfg.degree, cfg.grid_size,
                              cfg.activation, seed=seed)
    tc = kanlib.TrainConfig(cfg.epochs, cfg.learning_rate, cfg.batch_size, cfg.l2_penalty,
                            cfg.momentum, seed)
    model, history = kanlib.train(model, X[fit_idx], y[fit_idx], tc)
    return model, X[eval_idx], y[eval_idx], history


def kan_importances(model, X_eval, y_eval, cfg: KanSelectorConfig, kinds=KAN_SELECTORS) -> dict:
    out = {}
    if "kan_l1" in kinds:
        out["kan_l1"] = importance.importance_l1(model, cfg.include_base)
    if "kan_l2" in kinds or "kan_ko" in kinds:
        out["kan_l2"] = importance.importance_l2(model, cfg.include_base)
    if "kan_ko" in kinds:
        ko, rep = importance.importance_ko(model, X_eval, y_eval, cfg.delta, "inner_holdout")
        ko.info["base_risk"] = rep.base_risk
        if ko.all_zero:
            # no feature raises held-out loss; rank by the L2 norms instead
            ko.info["fallback"] = "kan_l2"
            ko.info["fallback_scores"] = out["kan_l2"].scores.tolist()
        out["kan_ko"] = ko
    if "kan_si" in kinds:
        out["kan_si"] = importance.importance_si(
            model, X_eval, SensitivityConfig(cfg.si_scale, "inner_holdout"))
    return {k: v for k, v in out.items() if k in kinds}


def ranking_scores(iv: ImportanceVector) -> np.ndarray:
    """Scores used for top-k: the vector itself, or its recorded fallback."""
    if iv.all_zero and "fallback_scores" in iv.info:
        return np.asarray(iv.info["fallback_scores"], dtype=float)
    return iv.scores


def _as_selector(s) -> SelectorSpec:
    if isinstance(s, SelectorSpec):
        return s
    if isinstance(s, dict):
        return SelectorSpec(s["kind"], {k: v for k, v in s.items() if k != "kind"})
    return SelectorSpec(s)


def run_selector(spec: SelectorSpec, X, y, task, n_classes, seed=0,
                 kan_cfg: KanSelectorConfig | None = None, kan_cache=None) -> ImportanceVector:
    """Importance over encoded columns for one selector fitted on ``(X, y)``.

    ``kan_cache`` (a dict) shares one trained KAN between the four KAN selectors.
    """
    p = spec.params
    kind = spec.kind
    if kind == "mi":
        return baselines.mi_rank(X, y, task, p["n_bins"])
    if kind == "lasso":
        return baselines.lasso_select(X, y, p["lam"], task, n_classes, p["n_lambdas"],
                                      p["cv_folds"], p["tol"], p["max_sweeps"], seed)
    if kind == "rf_importance":
        return baselines.rf_importance(X, y, task, n_classes, p["n_trees"], p["max_depth"],
                                       p["min_samples_leaf"], seed)
    if kind == "svm_rfe":
        return baselines.svm_rfe(X, y, task, n_classes, p["step_fraction"], p["C"],
                                 p["iterations"], p["ridge_alpha"])
    if kind == "permutation_rf":
        return baselines.permutation_importance(X, y, task, n_classes, p["n_repeats"],
                                                p["holdout_fraction"], p["n_trees"],
                                                p["max_depth"], seed)
    cfg = kan_cfg or KanSelectorConfig()
    overrides = {"kan_l1": "include_base", "kan_l2": "include_base", "kan_ko": "delta",
                 "kan_si": "si_scale"}
    key = overrides[kind]
    value = spec.hyperparameters.get("scale" if kind == "kan_si" else key)
    if value is not None:
        cfg = KanSelectorConfig(**{**asdict(cfg), key: value})
    if kan_cache is not None and "model" in kan_cache:
        model, X_eval, y_eval = kan_cache["model"]
    else:
        model, X_eval, y_eval, _ = fit_kan_selector(X, y, task, n_classes, kan_cfg or KanSelectorConfig(), seed)
        if kan_cache is not None:
            kan_cache["model"] = (model, X_eval, y_eval)
    return kan_importances(model, X_eval, y_eval, cfg, (kind,))[kind]


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def select_fold(dataset: Dataset, train_idx, selectors, retentions, kan_cfg=None, seed=0):
    """Fit preprocessing and every selector on the training rows of one fold.

    Returns ``(preprocessor, {selector: grouped ImportanceVector}, {(selector, k): J}, errors)``.
    Only ``dataset.X[train_idx]`` and ``dataset.y[train_idx]`` are read.
    """
    Xtr = dataset.X[train_idx]
    ytr = dataset.y[train_idx]
    prep = Standardizer(~dataset.categorical).fit(Xtr)
    Ztr = prep.transform(Xtr)
    d = dataset.n_sources
    cache = {}
    vectors, sets, errors = {}, {}, []
    for spec in map(_as_selector, selectors):
        try:
            iv = run_selector(spec, Ztr, ytr, dataset.task, dataset.n_classes, seed, kan_cfg, cache)
            fallback = iv.info.get("fallback_scores")
            iv = importance.aggregate_groups(iv, dataset.groups, dataset.source_names)
            if fallback is not None:
                iv.info["fallback_scores"] = np.bincount(
                    dataset.groups, weights=fallback, minlength=d).tolist()
        except Exception as exc:  # recorded per cell; the run continues
            errors.append({"selector": spec.kind, "stage": "selection", "error": repr(exc)})
            continue
        vectors[spec.kind] = iv
        for k in retentions:
            sets[(spec.kind, k)] = top_k(ranking_scores(iv), retention_count(k, d)).tolist()
    return prep, vectors, sets, errors


def _score_predictor(spec: PredictorSpec, Ztr, ytr, Zval, yval, task, n_classes):
    model = predlib.fit(spec, Ztr, ytr, n_classes)
    return task_score(task, yval, predlib.predict(model, Zval), n_classes)


def run_fold(dataset: Dataset, fold: int, train_idx, val_idx, selectors, retentions, predictors,
             kan_cfg=None, seed=0, include_all_features=True):
    fs = fold_seed(seed, fold)
    prep, vectors, sets, errors = select_fold(dataset, train_idx, selectors, retentions, kan_cfg, fs)
    for e in errors:
        e["fold"] = fold
    Ztr = prep.transform(dataset.X[train_idx])
    Zval = prep.transform(dataset.X[val_idx])
    ytr, yval = dataset.y[train_idx], dataset.y[val_idx]
    cells, selections = [], []
    jobs = [(s, k, J) for (s, k), J in sets.items()]
    if include_all_features:
        jobs.insert(0, (ALL_FEATURES, ALL_FEATURES_RETENTION, list(range(dataset.n_sources))))
    for s, k, J in jobs:
        cols = encoded_columns(dataset.groups, J)
        selections.append({"selector": s, "fold": fold, "retention": k, "indices": list(J)})
        for pspec in predictors:
            try:
                score = _score_predictor(pspec, Ztr[:, cols], ytr, Zval[:, cols], yval,
                                         dataset.task, dataset.n_classes)
            except Exception as exc:
                errors.append({"selector": s, "retention": k, "predictor": pspec.name,
                               "fold": fold, "stage": "prediction", "error": repr(exc)})
                score = None
            cells.append(ScoreCell(s, k, pspec.name, fold, score))
    imps = [{"selector": s, "fold": fold, "scores": iv.scores.tolist(),
             "raw_scores": None if iv.raw_scores is None else iv.raw_scores.tolist(),
             "all_zero": iv.all_zero}
            for s, iv in vectors.items()]
    return cells, selections, imps, errors


def _run_fold_job(args):
    return run_fold(*args)


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _as_predictor(p, task) -> PredictorSpec:
    if isinstance(p, PredictorSpec):
        return p
    if isinstance(p, dict):
        return PredictorSpec(p["name"], task, p.get("params", {}), p.get("seed", 0))
    return PredictorSpec(p, task)


def run_benchmark(dataset: Dataset, selectors=DEFAULT_SELECTORS, retentions=DEFAULT_RETENTIONS,
                  predictors=DEFAULT_PREDICTORS, fold_plan: FoldPlan | None = None,
                  kan_cfg: KanSelectorConfig | None = None, seed: int = 0,
                  include_all_features: bool = True, n_workers: int = 1) -> BenchmarkReport:
    """Score every (selector, retention, predictor, fold) cell.

    Failures are recorded in ``report.errors`` with a ``None`` score and do
    not stop the run. Results do not depend on ``n_workers``.
    """
    selectors = [_as_selector(s) for s in selectors]
    predictors = [_as_predictor(p, dataset.task) for p in predictors]
    retentions = list(retentions)
    for k in retentions:
        retention_count(k, dataset.n_sources)
    if fold_plan is None:
        fold_plan = plan_folds(dataset.n_samples, 5, dataset.task, seed, dataset.y)
    kan_cfg = kan_cfg or KanSelectorConfig()
    jobs = [(dataset, f, tr, va, selectors, retentions, predictors, kan_cfg, seed, include_all_features)
            for f, (tr, va) in enumerate(fold_plan.folds)]
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            results = list(ex.map(_run_fold_job, jobs))
    else:
        results = [_run_fold_job(j) for j in jobs]
    report = BenchmarkReport(dataset.task, [s.kind for s in selectors], [p.name for p in predictors],
                             retentions, fold_plan.n_folds)
    for cells, selections, imps, errors in results:
        report.cells.extend(cells)
        report.selections.extend(selections)
        report.importances.extend(imps)
        report.errors.extend(errors)
    settings = {
        "dataset": dataset.name,
        "n_samples": dataset.n_samples,
        "n_features": dataset.n_sources,
        "seed": seed,
        "fold_seed": fold_plan.seed,
        "selectors": [asdict(s) for s in selectors],
        "predictors": [asdict(p) for p in predictors],
        "retentions": retentions,
        "kan": asdict(kan_cfg),
    }
    report.metadata = {**settings, "config_hash": config_hash(settings),
                       "feature_names": list(dataset.source_names)}
    if dataset.informative is not None:
        report.metadata["informative"] = list(dataset.informative)
    return report


def default_workers() -> int:
    env = os.environ.get("KANFS_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
