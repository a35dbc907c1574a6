"""``kanfs`` command line: rank, benchmark, generate, inspect-model.

Every command that reads a run configuration takes a single JSON document::

    {
      "dataset": {"csv": "data.csv", "target": "y", "task": "classification",
                  "categorical": ["colour"]},
      "selectors": ["kan_l1", {"kind": "mi", "n_bins": 8}],
      "predictors": ["linear", {"name": "random_forest", "params": {"n_trees": 50}}],
      "retentions": [20, 40, 60],
      "folds": 5,
      "seed": 0,
      "kan": {"epochs": 300},
      "output_dir": "results"
    }

``dataset`` may instead be ``{"synthetic": "regression", "n": 500, "d": 10, ...}``.
Scalar fields can be overridden with flags. Exit codes: 0 success, 1 usage
or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__, importance, pipeline
from . import kan as kanlib
from .baselines import SELECTOR_DEFAULTS, SELECTOR_KINDS, SelectorSpec
from .data import DataError, Dataset, load_csv, make_classification, make_regression, write_csv
from .predictors import PredictorSpec
from .report import emit

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

CONFIG_KEYS = {"dataset", "task", "selectors", "predictors", "retentions", "folds", "seed", "kan",
               "output_dir", "workers"}


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field or line."""


def _field_error(path: str, msg: str) -> ConfigError:
    return ConfigError(f"config field {path!r}: {msg}")


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def _synthetic_dataset(spec: dict) -> Dataset:
    kind = spec["synthetic"]
    args = {k: v for k, v in spec.items() if k != "synthetic"}
    if kind == "classification":
        allowed = {"n", "d", "n_informative", "n_classes", "class_sep", "seed"}
        gen = make_classification
    elif kind == "regression":
        allowed = {"n", "d", "n_informative", "noise_sd", "seed"}
        gen = make_regression
    else:
        raise _field_error("dataset.synthetic", f"expected 'classification' or 'regression', got {kind!r}")
    unknown = set(args) - allowed
    if unknown:
        raise _field_error("dataset", f"unknown synthetic options {sorted(unknown)}")
    try:
        return gen(**args)
    except (DataError, TypeError) as exc:
        raise _field_error("dataset", str(exc)) from None


def load_dataset(cfg: dict) -> Dataset:
    spec = cfg.get("dataset")
    if not isinstance(spec, dict):
        raise _field_error("dataset", "required object with 'csv' or 'synthetic'")
    if "synthetic" in spec:
        ds = _synthetic_dataset(spec)
    elif "csv" in spec:
        unknown = set(spec) - {"csv", "target", "task", "categorical", "name"}
        if unknown:
            raise _field_error("dataset", f"unknown options {sorted(unknown)}")
        if "target" not in spec:
            raise _field_error("dataset.target", "required for csv datasets")
        task = spec.get("task", cfg.get("task"))
        try:
            ds = load_csv(Path(spec["csv"]), spec["target"], task, spec.get("categorical"),
                          spec.get("name"))
        except OSError as exc:
            raise _field_error("dataset.csv", f"cannot read {spec['csv']}: {exc.strerror}") from None
        except DataError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise _field_error("dataset", "needs either 'csv' or 'synthetic'")
    if cfg.get("task") not in (None, ds.task):
        raise _field_error("task", f"{cfg['task']!r} does not match dataset task {ds.task!r}")
    return ds


def parse_selectors(raw) -> list:
    if raw is None:
        raw = list(pipeline.DEFAULT_SELECTORS)
    if not isinstance(raw, list) or not raw:
        raise _field_error("selectors", "must be a non-empty list")
    out = []
    for i, item in enumerate(raw):
        where = f"selectors[{i}]"
        if isinstance(item, str):
            item = {"kind": item}
        if not isinstance(item, dict) or "kind" not in item:
            raise _field_error(where, "expected a selector name or an object with 'kind'")
        if item["kind"] not in SELECTOR_KINDS:
            raise _field_error(f"{where}.kind", f"unknown selector {item['kind']!r}; "
                                                f"expected one of {list(SELECTOR_KINDS)}")
        hp = {k: v for k, v in item.items() if k != "kind"}
        unknown = set(hp) - set(SELECTOR_DEFAULTS[item["kind"]])
        if unknown:
            raise _field_error(where, f"unknown hyperparameters {sorted(unknown)}")
        out.append(SelectorSpec(item["kind"], hp))
    return out


def parse_predictors(raw, task: str) -> list:
    if raw is None:
        raw = list(pipeline.DEFAULT_PREDICTORS)
    if not isinstance(raw, list) or not raw:
        raise _field_error("predictors", "must be a non-empty list")
    out = []
    for i, item in enumerate(raw):
        where = f"predictors[{i}]"
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise _field_error(where, "expected a predictor name or an object with 'name'")
        try:
            out.append(PredictorSpec(item["name"], task, item.get("params", {}), item.get("seed", 0)))
        except ValueError as exc:
            raise _field_error(where, str(exc)) from None
    return out


def parse_kan(raw) -> pipeline.KanSelectorConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise _field_error("kan", "must be an object")
    known = {f.name for f in fields(pipeline.KanSelectorConfig)}
    unknown = set(raw) - known
    if unknown:
        raise _field_error("kan", f"unknown options {sorted(unknown)}")
    return pipeline.KanSelectorConfig(**raw)


def parse_retentions(raw) -> list:
    if raw is None:
        return list(pipeline.DEFAULT_RETENTIONS)
    if not isinstance(raw, list) or not raw:
        raise _field_error("retentions", "must be a non-empty list")
    for i, k in enumerate(raw):
        if isinstance(k, bool) or not isinstance(k, (int, float)) or not 0 < k <= 100:
            raise _field_error(f"retentions[{i}]", f"must lie in (0, 100], got {k!r}")
    return raw


def resolve(cfg: dict) -> dict:
    """Validate a raw config document and build the run objects."""
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    ds = load_dataset(cfg)
    folds = cfg.get("folds", 5)
    if isinstance(folds, bool) or not isinstance(folds, int) or folds < 2:
        raise _field_error("folds", f"must be an integer >= 2, got {folds!r}")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise _field_error("seed", f"must be a nonnegative integer, got {seed!r}")
    return {
        "dataset": ds,
        "selectors": parse_selectors(cfg.get("selectors")),
        "predictors": parse_predictors(cfg.get("predictors"), ds.task),
        "retentions": parse_retentions(cfg.get("retentions")),
        "folds": folds,
        "seed": seed,
        "kan": parse_kan(cfg.get("kan")),
        "output_dir": Path(cfg.get("output_dir", ".")),
    }


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    for key in ("seed", "folds", "output_dir", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _hashable(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("output_dir", "workers")}


def _write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- commands --------------------------------------------------------------

def cmd_rank(cfg: dict) -> list:
    """Fit every selector on the full dataset; one importance document per selector."""
    run = resolve(cfg)
    ds, out = run["dataset"], run["output_dir"]
    chash = pipeline.config_hash(_hashable(cfg))
    prep = pipeline.Standardizer(~ds.categorical).fit(ds.X)
    Z = prep.transform(ds.X)
    cache, written = {}, []
    for spec in run["selectors"]:
        iv = pipeline.run_selector(spec, Z, ds.y, ds.task, ds.n_classes, run["seed"], run["kan"], cache)
        grouped = importance.aggregate_groups(iv, ds.groups, ds.source_names)
        doc = grouped.to_dict()
        doc.update({"cross_validated": False, "scope": "full dataset, not cross-validated",
                    "config_hash": chash, "dataset": ds.name,
                    "encoded_scores": iv.scores.tolist(), "encoded_names": list(ds.feature_names)})
        path = out / f"importance_{spec.kind}.json"
        _write(path, _dumps(doc))
        written.append(path)
    if "model" in cache:
        model = cache["model"][0]
        doc = kanlib.model_to_dict(model)
        doc.update({"config_hash": chash, "feature_names": list(ds.feature_names),
                    "preprocessing": {"mean": prep.mean_.tolist(), "scale": prep.scale_.tolist()}})
        path = out / "kan_model.json"
        _write(path, _dumps(doc))
        written.append(path)
    return written


def cmd_benchmark(cfg: dict, workers: int | None = None):
    """Run the cross-validated protocol; writes report.json, tables.csv and plotdata.csv."""
    run = resolve(cfg)
    ds, out = run["dataset"], run["output_dir"]
    plan = pipeline.plan_folds(ds.n_samples, run["folds"], ds.task, run["seed"], ds.y)
    n_workers = workers or cfg.get("workers") or pipeline.default_workers()
    report = pipeline.run_benchmark(ds, run["selectors"], run["retentions"], run["predictors"], plan,
                                    run["kan"], run["seed"], n_workers=n_workers)
    report.metadata["config_hash"] = pipeline.config_hash(_hashable(cfg))
    _write(out / "report.json", emit(report, "json"))
    _write(out / "tables.csv", emit(report, "csv"))
    _write(out / "plotdata.csv", emit(report, "plotdata"))
    return report


def cmd_generate(task: str, path, n: int = 500, d: int = 10, n_informative: int = 5,
                 n_classes: int = 2, noise_sd: float = 0.1, class_sep: float = 1.0,
                 seed: int = 0) -> tuple:
    """Write a synthetic CSV plus ``<stem>.informative.json`` listing the informative columns."""
    if task == "classification":
        ds = make_classification(n, d, n_informative, n_classes, class_sep, seed)
    else:
        ds = make_regression(n, d, n_informative, noise_sd, seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, path)
    sidecar = path.with_name(path.stem + ".informative.json")
    meta = {k: v for k, v in ds.metadata.items() if k != "coef"}
    doc = {"informative": ds.informative, "feature_names": ds.feature_names, "target": "y",
           "task": ds.task, "generator": meta,
           "config_hash": pipeline.config_hash(meta)}
    if "coef" in ds.metadata:
        doc["coef"] = ds.metadata["coef"]
    _write(sidecar, _dumps(doc))
    return path, sidecar


def inspect_model(doc: dict) -> str:
    model = kanlib.model_from_dict(doc)
    names = doc.get("feature_names") or [f"x{j}" for j in range(model.in_dim)]
    lines = [f"task: {model.task}" + (f" ({model.n_classes} classes)" if model.n_classes else ""),
             f"layers: {len(model.layers)}"]
    for i, layer in enumerate(model.layers):
        lines.append(f"  layer {i}: {layer.in_dim} -> {layer.out_dim}, K={layer.n_basis}, "
                     f"degree={layer.knots[0].degree}, activation={layer.activation}")
    l1 = importance.importance_l1(model).scores
    l2 = importance.importance_l2(model).scores
    width = max(len(n) for n in names)
    lines.append(f"{'feature':<{width}}  {'L1':>8}  {'L2':>8}")
    for j in np.argsort(-l2, kind="stable"):
        lines.append(f"{names[j]:<{width}}  {l1[j]:8.4f}  {l2[j]:8.4f}")
    return "\n".join(lines) + "\n"


# -- argument parsing ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kanfs", description="KAN-based feature selection benchmarks")
    p.add_argument("--version", action="version", version=f"kanfs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        sp.add_argument("config", help="JSON run configuration")
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--seed", type=int)

    r = sub.add_parser("rank", help="fit selectors on the full dataset (no cross-validation)")
    run_args(r)
    b = sub.add_parser("benchmark", help="cross-validated selection-to-prediction benchmark")
    run_args(b)
    b.add_argument("--folds", type=int)
    b.add_argument("--workers", type=int, help="process count (default: $KANFS_WORKERS or CPU count)")

    g = sub.add_parser("generate", help="write a synthetic dataset and its ground-truth sidecar")
    g.add_argument("task", choices=["classification", "regression"])
    g.add_argument("-o", "--output", required=True, help="CSV path")
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--d", type=int, default=10)
    g.add_argument("--n-informative", type=int, default=5)
    g.add_argument("--n-classes", type=int, default=2)
    g.add_argument("--noise-sd", type=float, default=0.1)
    g.add_argument("--class-sep", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)

    m = sub.add_parser("inspect-model", help="summarise a saved KAN model")
    m.add_argument("model", help="kan_model.json written by 'rank'")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "generate":
            paths = cmd_generate(args.task, args.output, args.n, args.d, args.n_informative,
                                 args.n_classes, args.noise_sd, args.class_sep, args.seed)
            for path in paths:
                print(path)
            return EXIT_OK
        if args.command == "inspect-model":
            try:
                doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read model {args.model}: {exc}") from None
            sys.stdout.write(inspect_model(doc))
            return EXIT_OK
        cfg = _apply_overrides(read_config(args.config), args)
        if args.command == "rank":
            for path in cmd_rank(cfg):
                print(path)
            return EXIT_OK
        if args.workers is not None and args.workers < 1:
            raise _field_error("workers", "must be >= 1")
        report = cmd_benchmark(cfg, args.workers)
        for err in report.errors:
            print(f"warning: {err}", file=sys.stderr)
        scored = sum(c.score is not None for c in report.cells)
        print(f"{scored}/{len(report.cells)} cells scored; config hash "
              f"{report.metadata['config_hash']}")
        return EXIT_OK if scored else EXIT_RUNTIME
    except ConfigError as exc:
        print(f"kanfs: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError, KeyError) as exc:
        print(f"kanfs: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, (DataError, KeyError)) else EXIT_RUNTIME
    except (OSError, ArithmeticError, RuntimeError) as exc:
        print(f"kanfs: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
