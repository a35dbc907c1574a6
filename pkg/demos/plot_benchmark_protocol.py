"""
A cross-validated selection benchmark
=====================================

Run every selector through the leakage-safe protocol on synthetic
classification data, then print the 60% retention table and the
retention-averaged scores.
"""

from kanfs import pipeline
from kanfs.data import make_classification
from kanfs.predictors import PredictorSpec
from kanfs.report import emit, to_table

###############################################################################
# Fewer trees than the defaults keep this demo under a minute.
ds = make_classification(n=500, d=10, n_informative=5, seed=0)
predictors = [
    PredictorSpec("logreg", "classification"),
    PredictorSpec("rf", "classification", {"n_trees": 50}),
    PredictorSpec("gbt", "classification", {"n_trees": 50}),
]
plan = pipeline.plan_folds(ds.n_samples, 5, ds.task, seed=0, y=ds.y)
report = pipeline.run_benchmark(ds, pipeline.DEFAULT_SELECTORS, [20, 40, 60], predictors, plan)
print(f"{len(report.cells)} scored cells, {len(report.errors)} errors")

###############################################################################
# Each selector's fold-mean macro-F1 at 60% retention.
print(to_table(report, 60).to_csv(digits=4))

###############################################################################
# How often did each selector's 40% set contain the informative columns?
truth = set(ds.informative)
for s in report.selectors:
    hits = [len(truth & set(report.selected(s, f, 40))) for f in range(plan.n_folds)]
    print(f"{s:>15}: informative columns kept per fold = {hits}")

###############################################################################
# Long-format rows for an external plotting tool.
print(emit(report, "plotdata").decode().splitlines()[:5])
