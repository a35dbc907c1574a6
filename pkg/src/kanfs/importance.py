"""Feature importances read off a trained KAN, and the shared ImportanceVector type.

Four measures, all restricted to the first layer (the only one that sees raw
features):

* ``kan_l1`` / ``kan_l2``: entrywise L1 / Frobenius norm of each feature's
  spline block, optionally plus the norm of its base-weight column.
* ``kan_ko``: clamped increase of held-out loss when a feature's first-layer
  parameters are zeroed.
* ``kan_si``: mean absolute input gradient on held-out data, scaled by the
  column's spread.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kan as kanlib
from .kan import KanModel

# data splits an evaluation-based measure may not be computed on
FORBIDDEN_EVAL_SPLITS = ("train", "outer_validation")


@dataclass(eq=False)
class ImportanceVector:
    """Nonnegative per-feature scores, summing to one unless every raw score is zero."""

    scores: np.ndarray
    selector: str
    feature_names: list | None = None
    raw_scores: np.ndarray | None = None
    all_zero: bool = False
    config: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.raw_scores is not None:
            self.raw_scores = np.asarray(self.raw_scores, dtype=float)
        if self.feature_names is not None:
            self.feature_names = list(self.feature_names)
            if len(self.feature_names) != self.scores.size:
                raise ValueError("feature_names length does not match scores")

    @property
    def normalized(self) -> bool:
        return not self.all_zero

    def __len__(self):
        return self.scores.size

    def to_dict(self) -> dict:
        return {
            "selector": self.selector,
            "feature_names": self.feature_names,
            "scores": self.scores.tolist(),
            "raw_scores": None if self.raw_scores is None else self.raw_scores.tolist(),
            "all_zero": self.all_zero,
            "config": self.config,
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ImportanceVector":
        return cls(np.array(doc["scores"], dtype=float), doc["selector"], doc.get("feature_names"),
                   None if doc.get("raw_scores") is None else np.array(doc["raw_scores"], dtype=float),
                   bool(doc.get("all_zero", False)), doc.get("config", {}), doc.get("info", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ImportanceVector":
        return cls.from_dict(json.loads(text))


def normalize(raw, selector: str, **kwargs) -> ImportanceVector:
    """Sum-normalise nonnegative raw scores; an all-zero input is kept and flagged."""
    raw = np.asarray(raw, dtype=float)
    if np.any(~np.isfinite(raw)) or np.any(raw < 0):
        raise ValueError(f"{selector}: raw scores must be finite and nonnegative")
    total = raw.sum()
    if total <= 0:
        return ImportanceVector(np.zeros_like(raw), selector, raw_scores=raw, all_zero=True, **kwargs)
    return ImportanceVector(raw / total, selector, raw_scores=raw, **kwargs)


def aggregate_groups(iv: ImportanceVector, groups: Sequence[int],
                     group_names: Sequence[str] | None = None) -> ImportanceVector:
    """Sum encoded-column scores back onto their source features."""
    groups = np.asarray(groups, dtype=int)
    if groups.size != iv.scores.size:
        raise ValueError("group map does not cover every encoded column")
    n_groups = int(groups.max()) + 1
    raw = iv.raw_scores if iv.raw_scores is not None else iv.scores
    return ImportanceVector(
        np.bincount(groups, weights=iv.scores, minlength=n_groups), iv.selector,
        None if group_names is None else list(group_names),
        np.bincount(groups, weights=raw, minlength=n_groups),
        iv.all_zero, dict(iv.config), dict(iv.info))


# -- coefficient norms -----------------------------------------------------

def _norm_scores(model: KanModel, order: int, include_base: bool) -> np.ndarray:
    layer = model.layers[0]
    W = layer.w_spline
    if order == 1:
        raw = np.abs(W).sum(axis=(0, 2))
        if include_base:
            raw = raw + np.abs(layer.w_base).sum(axis=0)
    else:
        raw = np.sqrt((W ** 2).sum(axis=(0, 2)))
        if include_base:
            raw = raw + np.sqrt((layer.w_base ** 2).sum(axis=0))
    return raw


def importance_l1(model: KanModel, include_base: bool = True, feature_names=None) -> ImportanceVector:
    raw = _norm_scores(model, 1, include_base)
    return normalize(raw, "kan_l1", feature_names=feature_names,
                     config={"include_base": include_base})


def importance_l2(model: KanModel, include_base: bool = True, feature_names=None) -> ImportanceVector:
    raw = _norm_scores(model, 2, include_base)
    return normalize(raw, "kan_l2", feature_names=feature_names,
                     config={"include_base": include_base})


# -- knockout --------------------------------------------------------------

@dataclass
class KnockoutReport:
    base_risk: float
    risks: np.ndarray
    deltas: np.ndarray
    delta_floor: float
    smoothed: np.ndarray  # deltas / (sum(deltas) + delta_floor)


def knockout_feature(model: KanModel, j: int) -> KanModel:
    """Copy of ``model`` with feature ``j``'s base column and spline block zeroed in layer 1."""
    d = model.in_dim
    if not 0 <= j < d:
        raise IndexError(f"feature index {j} out of range for {d} inputs")
    out = model.copy()
    first = out.layers[0]
    first.w_base[:, j] = 0.0
    first.w_spline[:, j, :] = 0.0
    return out


def _check_eval_split(tag: str):
    if tag in FORBIDDEN_EVAL_SPLITS:
        raise ValueError(f"evaluation data tagged {tag!r}; importance must be measured on held-out data")


def importance_ko(model: KanModel, X_eval, y_eval, delta: float = 1e-12,
                  evaluation_split: str = "heldout", feature_names=None):
    """Knockout importance on held-out data; returns ``(ImportanceVector, KnockoutReport)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    _check_eval_split(evaluation_split)
    X_eval = np.asarray(X_eval, dtype=float)
    if X_eval.shape[0] == 0:
        raise ValueError("empty evaluation set")
    base = kanlib.loss(model, X_eval, y_eval)
    risks = np.array([kanlib.loss(knockout_feature(model, j), X_eval, y_eval)
                      for j in range(model.in_dim)])
    deltas = np.maximum(0.0, risks - base)
    report = KnockoutReport(base, risks, deltas, delta, deltas / (deltas.sum() + delta))
    iv = normalize(deltas, "kan_ko", feature_names=feature_names,
                   config={"delta": delta, "evaluation_split": evaluation_split})
    return iv, report


# -- sensitivity integral --------------------------------------------------

SCALES = ("std", "iqr", "none")


@dataclass
class SensitivityConfig:
    scale: str = "std"
    evaluation_split: str = "heldout"
    onehot_groups: Sequence[int] | None = None
    group_names: Sequence[str] | None = None

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}, got {self.scale!r}")


def column_scale(X, scale: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    # a constant column has zero spread exactly, not std's rounding residue
    constant = np.ptp(X, axis=0) == 0
    if scale == "std":
        return np.where(constant, 0.0, X.std(axis=0))
    if scale == "iqr":
        q75, q25 = np.percentile(X, [75, 25], axis=0)
        return np.where(constant, 0.0, q75 - q25)
    if scale == "none":
        return np.ones(X.shape[1])
    raise ValueError(f"unknown scale {scale!r}")


def importance_si(model: KanModel, X_eval, cfg: SensitivityConfig | None = None,
                  feature_names=None) -> ImportanceVector:
    """Spread-scaled mean absolute input gradient over held-out rows."""
    cfg = cfg or SensitivityConfig()
    _check_eval_split(cfg.evaluation_split)
    X_eval = np.asarray(X_eval, dtype=float)
    if X_eval.shape[0] == 0:
        raise ValueError("empty evaluation set")
    mean_abs = np.abs(kanlib.input_gradients(model, X_eval)).mean(axis=0)
    scaled = column_scale(X_eval, cfg.scale) * mean_abs
    iv = normalize(scaled, "kan_si", feature_names=feature_names,
                   config={"scale": cfg.scale, "evaluation_split": cfg.evaluation_split},
                   info={"mean_abs_gradient": mean_abs.tolist()})
    if cfg.onehot_groups is not None:
        iv = aggregate_groups(iv, cfg.onehot_groups, cfg.group_names)
    return iv
