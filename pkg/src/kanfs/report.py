"""Benchmark results: fold-level score cells, aggregates, appendix-style tables, emitters."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

ALL_FEATURES = "all_features"
ALL_FEATURES_RETENTION = 100

SELECTOR_LABELS = {
    ALL_FEATURES: "All Features",
    "kan_ko": "KAN-KO",
    "kan_l1": "KAN-L1",
    "kan_l2": "KAN-L2",
    "kan_si": "KAN-SI",
    "lasso": "LASSO/L1",
    "mi": "Mutual Info",
    "permutation_rf": "Perm. (RF)",
    "rf_importance": "Random Forest",
    "svm_rfe": "SVM-RFE",
}
SELECTOR_ORDER = list(SELECTOR_LABELS)

_PREDICTOR_LABELS = {
    "gradient_boosted_trees": "GB", "gbt": "GB", "gb": "GB",
    "xgboost": "XGB", "xgb": "XGB",
    "random_forest": "RF", "rf": "RF",
    "ridge": "Ridge", "logreg": "LogReg", "logistic": "LogReg",
}


def predictor_label(name: str, task: str) -> str:
    if name in _PREDICTOR_LABELS:
        return _PREDICTOR_LABELS[name]
    if name == "linear":
        return "LogReg" if task == "classification" else "Ridge"
    return name


@dataclass(frozen=True)
class ScoreCell:
    selector: str
    retention: float
    predictor: str
    fold: int
    score: float | None

    def __post_init__(self):
        if self.score is not None and not math.isfinite(self.score):
            object.__setattr__(self, "score", None)


@dataclass
class BenchmarkReport:
    task: str
    selectors: list
    predictors: list
    retentions: list
    n_folds: int
    cells: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    importances: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def fold_scores(self, selector, retention, predictor) -> list:
        return [c.score for c in self.cells
                if c.selector == selector and c.retention == retention
                and c.predictor == predictor and c.score is not None]

    def aggregates(self) -> dict:
        """Mean fold score per ``(selector, retention, predictor)``."""
        groups = {}
        for c in self.cells:
            if c.score is not None:
                groups.setdefault((c.selector, c.retention, c.predictor), []).append(c.score)
        return {k: float(np.mean(v)) for k, v in groups.items()}

    def per_fold_retention_means(self, selector, predictor) -> dict:
        by_fold = {}
        for c in self.cells:
            if c.selector == selector and c.predictor == predictor and c.score is not None:
                by_fold.setdefault(c.fold, []).append(c.score)
        return {f: float(np.mean(v)) for f, v in sorted(by_fold.items())}

    def retention_averages(self) -> dict:
        """Mean over retention levels (and folds) per ``(selector, predictor)``."""
        agg = self.aggregates()
        out = {}
        for (s, k, m), v in agg.items():
            out.setdefault((s, m), []).append(v)
        return {key: float(np.mean(v)) for key, v in out.items()}

    def selected(self, selector, fold, retention) -> list:
        for rec in self.selections:
            if rec["selector"] == selector and rec["fold"] == fold and rec["retention"] == retention:
                return rec["indices"]
        raise KeyError((selector, fold, retention))

    def column_selectors(self) -> list:
        present = {c.selector for c in self.cells}
        return [s for s in SELECTOR_ORDER if s in present] + sorted(present - set(SELECTOR_ORDER))

    def to_dict(self) -> dict:
        return {
            "format": "kanfs-benchmark-report",
            "version": 1,
            "task": self.task,
            "selectors": list(self.selectors),
            "predictors": list(self.predictors),
            "retentions": list(self.retentions),
            "n_folds": self.n_folds,
            "cells": [asdict(c) for c in self.cells],
            "aggregates": [{"selector": s, "retention": k, "predictor": m, "mean": v}
                           for (s, k, m), v in sorted(self.aggregates().items(), key=str)],
            "retention_averages": [{"selector": s, "predictor": m, "mean": v}
                                   for (s, m), v in sorted(self.retention_averages().items())],
            "selections": self.selections,
            "importances": self.importances,
            "errors": self.errors,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchmarkReport":
        if doc.get("format") != "kanfs-benchmark-report":
            raise ValueError("not a kanfs benchmark report")
        return cls(doc["task"], doc["selectors"], doc["predictors"], doc["retentions"],
                   doc["n_folds"], [ScoreCell(**c) for c in doc["cells"]], doc["selections"],
                   doc["importances"], doc["errors"], doc["metadata"])


@dataclass
class Table:
    retention: float
    rows: list           # predictor names
    row_labels: list
    columns: list        # selector ids, all-features first
    column_labels: list
    values: np.ndarray   # (rows, columns); NaN where no score

    def to_csv(self, digits: int = 6) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Models"] + self.column_labels)
        for label, row in zip(self.row_labels, self.values):
            w.writerow([label] + ["" if np.isnan(v) else f"{v:.{digits}f}" for v in row])
        return buf.getvalue()


def to_table(report: BenchmarkReport, retention) -> Table:
    """Predictors x selectors grid of fold-mean scores at one retention level.

    The "All Features" column comes from the passthrough cells.
    """
    if retention not in report.retentions:
        raise KeyError(f"unknown retention {retention!r}; run used {report.retentions}")
    agg = report.aggregates()
    cols = report.column_selectors()
    rows = sorted(report.predictors, key=lambda m: predictor_label(m, report.task))
    values = np.full((len(rows), len(cols)), np.nan)
    for i, m in enumerate(rows):
        for j, s in enumerate(cols):
            k = ALL_FEATURES_RETENTION if s == ALL_FEATURES else retention
            values[i, j] = agg.get((s, k, m), np.nan)
    return Table(retention, rows, [predictor_label(m, report.task) for m in rows], cols,
                 [SELECTOR_LABELS.get(s, s) for s in cols], values)


def plot_rows(report: BenchmarkReport) -> list:
    """Long-format rows ``(retention, selector, predictor, mean, stderr, n_folds)``.

    ``retention == "avg"`` rows average each fold over retention levels first
    (the figure-style summary); stderr is the sample standard deviation of
    fold scores over ``sqrt(F)``.
    """
    def summary(scores):
        scores = np.asarray(scores, dtype=float)
        f = scores.size
        se = float(np.std(scores, ddof=1) / np.sqrt(f)) if f > 1 else 0.0
        return float(scores.mean()), se, f

    out = []
    for s in report.column_selectors():
        for m in report.predictors:
            levels = [ALL_FEATURES_RETENTION] if s == ALL_FEATURES else report.retentions
            for k in levels:
                scores = report.fold_scores(s, k, m)
                if scores:
                    out.append((k, s, m, *summary(scores)))
            per_fold = report.per_fold_retention_means(s, m)
            if per_fold:
                out.append(("avg", s, m, *summary(list(per_fold.values()))))
    return out


def emit(report: BenchmarkReport, fmt: str, retention=None) -> bytes:
    """Serialise as ``json`` (full dump), ``csv`` (appendix tables) or ``plotdata``."""
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        levels = report.retentions if retention is None else [retention]
        parts = [to_table(report, k).to_csv() for k in levels]
        if len(parts) == 1:
            return parts[0].encode()
        return "\n".join(f"# retention={k}\n{p}" for k, p in zip(levels, parts)).encode()
    if fmt == "plotdata":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["retention", "selector", "predictor", "mean", "stderr", "n_folds"])
        for row in plot_rows(report):
            w.writerow([row[0], SELECTOR_LABELS.get(row[1], row[1]),
                        predictor_label(row[2], report.task), repr(row[3]), repr(row[4]), row[5]])
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {fmt!r}; expected json, csv or plotdata")


def from_json(data) -> BenchmarkReport:
    if isinstance(data, bytes):
        data = data.decode()
    return BenchmarkReport.from_dict(json.loads(data))
