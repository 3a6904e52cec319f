"""Regenerates the toy records table shipped in this directory.

Synthetic youth mental health cohort: 120 people observed at two rounds.
Run from the repository root: python3 toy/generate.py
"""
import csv
import datetime as dt
import numpy as np

rng = np.random.default_rng(20220411)
N_PEOPLE = 120

rows = []
for p in range(N_PEOPLE):
    uid = f"P{p + 1:03d}"
    group = "clinic" if rng.random() < 0.6 else "online"
    sex = rng.choice(["F", "M", "X"], p=[0.55, 0.40, 0.05])
    age = int(rng.integers(12, 26))
    start = dt.date(2021, 1, 4) + dt.timedelta(days=int(rng.integers(0, 180)))
    severity = rng.normal(0.0, 1.0)
    for rnd in (1, 2):
        if rnd == 2:
            severity = 0.7 * severity + rng.normal(-0.3 if group == "clinic" else -0.1, 0.6)
        when = start if rnd == 1 else start + dt.timedelta(days=int(rng.integers(90, 271)))
        k6 = int(np.clip(round(15 + 5 * severity + rng.normal(0, 2)), 6, 30))
        phq9 = int(np.clip(round(10 + 5 * severity + rng.normal(0, 2.5)), 0, 27))
        sofas = int(np.clip(round(65 - 10 * severity + rng.normal(0, 6)), 0, 100))
        items = []
        for j in range(5):
            latent = 1.6 + 0.75 * severity + rng.normal(0, 0.7)
            items.append(int(np.clip(round(latent), 1, 5)))
        row = {
            "uid": uid,
            "round": rnd,
            "group": group,
            "date": when.isoformat(),
            "age": age + (1 if rnd == 2 and rng.random() < 0.4 else 0),
            "sex": sex,
            "k6": k6,
            "phq9": phq9,
            "sofas": sofas,
        }
        for j, level in enumerate(items):
            row[f"eq{j + 1}"] = level
        row["age"] = min(row["age"], 25)
        if rng.random() < 0.02:
            row["phq9"] = "NA"
        if rng.random() < 0.02:
            row["sofas"] = "NA"
        rows.append(row)

with open("toy/records.csv", "w", newline="") as fh:
    writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
