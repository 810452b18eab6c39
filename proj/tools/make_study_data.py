#!/usr/bin/env python3
"""Regenerate data/study.csv and data/study_schema.json (deterministic)."""
import csv
import json
import pathlib
import random

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"
rng = random.Random(20240607)


def patient(wfns, rebleed, ab, evd):
    return {
        "Centre": f"C{rng.randint(1, 6):02d}",
        "Age": round(rng.gauss(55, 12), 1),
        "Sex": rng.randint(0, 1),
        "Hypertension": int(rng.random() < 0.35),
        "WFNS": wfns,
        "Rebleed": rebleed,
        "AB": round(ab, 4),
        "EVD": evd,
        "GOS": rng.choice([1, 1, 2, 2, 3, 4, 5]),
    }


rows = []
# Stratum WFNS 1, no rebleed, AB > 0.12: agreement at both extremes,
# equipoise in the middle.
for evd in [1] * 34 + [0] * 34:
    rows.append(patient(1, 0, 0.30 + rng.uniform(-0.01, 0.01), evd))
for _ in range(40):
    rows.append(patient(1, 0, 0.55 + rng.uniform(-0.01, 0.01), 1))
for _ in range(39):
    rows.append(patient(1, 0, 0.16 + rng.uniform(-0.01, 0.01), 0))
# Outside the stratum.
for _ in range(40):
    rows.append(patient(rng.randint(2, 5), rng.randint(0, 1), rng.uniform(0.05, 0.6), rng.randint(0, 1)))
for _ in range(30):
    rows.append(patient(1, 1, rng.uniform(0.13, 0.6), rng.randint(0, 1)))
for _ in range(41):
    rows.append(patient(1, 0, rng.uniform(0.03, 0.12), rng.randint(0, 1)))

rng.shuffle(rows)
with open(DATA / "study.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    cols = ["id"] + list(rows[0].keys())
    w.writerow(cols)
    for i, r in enumerate(rows, 1):
        w.writerow([f"P{i:03d}"] + [r[c] for c in cols[1:]])

schema = {"columns": [
    {"name": "id", "type": "id"},
    {"name": "Centre", "type": "categorical", "role": "centre",
     "levels": [f"C{i:02d}" for i in range(1, 7)]},
    {"name": "Age", "type": "real", "role": "covariate"},
    {"name": "Sex", "type": "binary", "role": "covariate"},
    {"name": "Hypertension", "type": "binary", "role": "covariate"},
    {"name": "WFNS", "type": "ordered", "role": "covariate", "levels": ["1", "2", "3", "4", "5", "6"]},
    {"name": "Rebleed", "type": "binary", "role": "covariate"},
    {"name": "AB", "type": "real", "role": "scan"},
    {"name": "EVD", "type": "binary", "role": "treatment"},
    {"name": "GOS", "type": "ordered", "role": "outcome", "levels": ["1", "2", "3", "4", "5"],
     "positive_levels": ["3", "4", "5"]},
]}
(DATA / "study_schema.json").write_text(json.dumps(schema, indent=2) + "\n")
