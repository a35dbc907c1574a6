"""
Benchmarking a CSV file with a categorical column
=================================================

Categorical columns are one-hot encoded on load. Selectors score the encoded
columns, and those scores are summed back onto the source feature before
ranking, so a category is kept or dropped as a whole.
"""

import tempfile
from pathlib import Path

import numpy as np

from kanfs import pipeline
from kanfs.data import load_csv

###############################################################################
# Write a small table whose label depends on ``colour`` and ``size``.
rng = np.random.default_rng(1)
colour = rng.choice(["red", "green", "blue"], 300)
size = rng.normal(size=300)
noise = rng.normal(size=(300, 3))
label = np.where((colour == "red") ^ (size > 0.3), "yes", "no")
path = Path(tempfile.mkdtemp()) / "toy.csv"
with path.open("w") as fh:
    fh.write("colour,size,n1,n2,n3,label\n")
    for row in zip(colour, size, *noise.T, label):
        fh.write(",".join(str(v) for v in row) + "\n")

ds = load_csv(path, target="label")
print("encoded columns:", ds.feature_names)
print("source features:", ds.source_names)

###############################################################################
# Rank on one fold's training rows and keep the top 40% of sources.
plan = pipeline.plan_folds(ds.n_samples, 5, ds.task, seed=0, y=ds.y)
train_rows = plan.folds[0][0]
_, vectors, sets, _ = pipeline.select_fold(ds, train_rows, ["mi", "kan_si", "rf_importance"], [40])
for s, iv in vectors.items():
    kept = [ds.source_names[j] for j in sets[(s, 40)]]
    print(f"{s:>14}: {dict(zip(ds.source_names, np.round(iv.scores, 3).tolist()))} -> keep {kept}")
