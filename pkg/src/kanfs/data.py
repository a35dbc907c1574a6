"""Datasets: CSV ingestion with one-hot encoding, and synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    """Encoded feature matrix and targets.

    ``groups[c]`` is the source feature of encoded column ``c``; numeric
    columns are their own group, one-hot dummies share their category's group.
    """

    X: np.ndarray
    y: np.ndarray
    task: str
    feature_names: list
    groups: np.ndarray | None = None
    source_names: list | None = None
    categorical: np.ndarray | None = None
    class_labels: list | None = None
    informative: list | None = None
    name: str = "dataset"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        n, d = self.X.shape
        if self.task not in ("classification", "regression"):
            raise DataError(f"unknown task {self.task!r}")
        self.y = np.asarray(self.y, dtype=int if self.task == "classification" else float)
        if self.y.shape != (n,):
            raise DataError(f"target shape {self.y.shape} does not match {n} rows")
        if not np.all(np.isfinite(self.X)) or (self.task == "regression" and not np.all(np.isfinite(self.y))):
            raise DataError("non-finite values in dataset")
        self.feature_names = list(self.feature_names)
        if len(self.feature_names) != d or len(set(self.feature_names)) != d:
            raise DataError("feature names must be unique and match the column count")
        if self.groups is None:
            self.groups = np.arange(d)
        self.groups = np.asarray(self.groups, dtype=int)
        if self.source_names is None:
            self.source_names = list(self.feature_names)
        if self.categorical is None:
            self.categorical = np.zeros(d, dtype=bool)
        self.categorical = np.asarray(self.categorical, dtype=bool)
        if self.groups.shape != (d,) or set(self.groups.tolist()) != set(range(len(self.source_names))):
            raise DataError("group map must cover every encoded column and every source feature")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_sources(self) -> int:
        return len(self.source_names)

    @property
    def n_classes(self) -> int | None:
        if self.task != "classification":
            return None
        if self.class_labels is not None:
            return len(self.class_labels)
        return int(self.y.max()) + 1

    def onehot_groups(self) -> dict:
        """Source name -> list of encoded columns, for categorical sources only."""
        out = {}
        for c in np.nonzero(self.categorical)[0]:
            out.setdefault(self.source_names[self.groups[c]], []).append(int(c))
        return out


def _parse_float(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, target: str, task: str | None = None, categorical=None,
             name: str | None = None) -> Dataset:
    """Read a headed CSV file; non-numeric (or listed) feature columns are one-hot encoded.

    ``task`` defaults to classification for a non-numeric target and
    regression otherwise. Rows with missing or unparseable values raise
    :class:`DataError` naming the file line.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
            cells = [c.strip() for c in row]
            if any(c == "" for c in cells):
                raise DataError(f"{path}: line {line_no}: missing value in column "
                                f"{header[cells.index('')]!r}")
            rows.append((line_no, cells))
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if target not in header:
        raise DataError(f"{path}: target column {target!r} not found (columns: {header})")
    if not rows:
        raise DataError(f"{path}: no data rows")
    ti = header.index(target)
    categorical = set(categorical or [])
    unknown = categorical - set(header)
    if unknown:
        raise DataError(f"{path}: categorical columns not in header: {sorted(unknown)}")

    columns = list(zip(*[cells for _, cells in rows]))
    target_raw = columns[ti]
    target_numeric = [_parse_float(v) for v in target_raw]
    if task is None:
        task = "regression" if all(v is not None for v in target_numeric) else "classification"

    X_cols, names, groups, is_cat, sources = [], [], [], [], []
    for ci, col_name in enumerate(header):
        if ci == ti:
            continue
        values = columns[ci]
        parsed = [_parse_float(v) for v in values]
        if col_name not in categorical and all(v is not None for v in parsed):
            X_cols.append(np.array(parsed))
            names.append(col_name)
            groups.append(len(sources))
            is_cat.append(False)
            sources.append(col_name)
            continue
        if col_name not in categorical:
            bad = next(i for i, v in enumerate(parsed) if v is None)
            # mixed column: mostly numbers with a stray token is a malformed row
            if sum(v is not None for v in parsed) > len(parsed) // 2:
                raise DataError(f"{path}: line {rows[bad][0]}: unparseable value "
                                f"{values[bad]!r} in numeric column {col_name!r}")
        levels = sorted(set(values))
        for level in levels:
            X_cols.append(np.array([1.0 if v == level else 0.0 for v in values]))
            names.append(f"{col_name}={level}")
            groups.append(len(sources))
            is_cat.append(True)
        sources.append(col_name)

    class_labels = None
    if task == "classification":
        if all(v is not None for v in target_numeric):
            class_labels = sorted(set(target_raw), key=float)
        else:
            class_labels = sorted(set(target_raw))
        lookup = {v: i for i, v in enumerate(class_labels)}
        y = np.array([lookup[v] for v in target_raw])
    else:
        bad = [i for i, v in enumerate(target_numeric) if v is None]
        if bad:
            raise DataError(f"{path}: line {rows[bad[0]][0]}: unparseable target {target_raw[bad[0]]!r}")
        y = np.array(target_numeric)
    X = np.column_stack(X_cols) if X_cols else np.empty((len(rows), 0))
    return Dataset(X, y, task, names, np.array(groups), sources, np.array(is_cat, dtype=bool),
                   class_labels, None, name or path.stem, {"source": str(path), "target": target})


def _check_dims(n, d, n_informative):
    if n < 1 or d < 1 or not 1 <= n_informative <= d:
        raise DataError(f"invalid dims: n={n}, d={d}, n_informative={n_informative}")


def make_classification(n: int = 500, d: int = 10, n_informative: int = 5, n_classes: int = 2,
                        class_sep: float = 1.0, seed: int = 0) -> Dataset:
    """Gaussian class clusters on ``n_informative`` dimensions plus standard-normal noise.

    Cluster centres sit on hypercube vertices ``+-class_sep``; every
    informative dimension separates at least two classes. Column positions
    are shuffled and the informative ones recorded.
    """
    _check_dims(n, d, n_informative)
    if n_classes < 2:
        raise DataError("n_classes must be >= 2")
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n_classes, n_informative))
    for k in range(n_informative):
        if np.all(signs[:, k] == signs[0, k]):
            signs[-1, k] = -signs[0, k]
    if n_classes == 2:
        signs[1] = -signs[0]
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    X = rng.standard_normal((n, d))
    X[:, :n_informative] += class_sep * signs[y]
    order = rng.permutation(d)
    X = X[:, order]
    informative = sorted(int(np.nonzero(order == k)[0][0]) for k in range(n_informative))
    return Dataset(X, y, "classification", [f"x{j}" for j in range(d)],
                   class_labels=list(range(n_classes)), informative=informative,
                   name="make_classification",
                   metadata={"generator": "make_classification", "n": n, "d": d,
                             "n_informative": n_informative, "n_classes": n_classes,
                             "class_sep": class_sep, "seed": seed})


def make_regression(n: int = 500, d: int = 10, n_informative: int = 5, noise_sd: float = 0.1,
                    seed: int = 0) -> Dataset:
    """``y = X w + noise`` with standard-normal ``X`` and ``w`` nonzero only on informative columns.

    Nonzero weights have magnitude uniform in ``[1, 10]`` and random sign.
    """
    _check_dims(n, d, n_informative)
    if noise_sd < 0:
        raise DataError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    informative = np.sort(rng.choice(d, size=n_informative, replace=False))
    w = np.zeros(d)
    w[informative] = rng.uniform(1.0, 10.0, n_informative) * rng.choice([-1.0, 1.0], n_informative)
    y = X @ w + noise_sd * rng.standard_normal(n)
    return Dataset(X, y, "regression", [f"x{j}" for j in range(d)],
                   informative=informative.tolist(), name="make_regression",
                   metadata={"generator": "make_regression", "n": n, "d": d,
                             "n_informative": n_informative, "noise_sd": noise_sd, "seed": seed,
                             "coef": w.tolist()})


def write_csv(dataset: Dataset, path, target: str = "y") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [target])
        for row, t in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in row] + [repr(t.item())])
