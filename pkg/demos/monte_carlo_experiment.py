"""
A full Monte Carlo sweep
========================

The harness runs every estimator over a power sweep and writes plot-ready
CSV files plus a manifest with seeds and file hashes. This script runs the
small bundled plan into a temporary folder and prints the summary table.
The same run is available from the shell as
``coopvlp run --plan <plan.json> --out <dir>``.
"""

import csv
import json
import tempfile
from pathlib import Path

from coopvlp.harness import bundled_plan_path, load_plan, run_experiment

plan = load_plan(bundled_plan_path("plan_desk"))
print("sweep", plan.sweep_variable, plan.sweep_values, "M =", plan.monte_carlo_runs)

with tempfile.TemporaryDirectory() as tmp:
    files = run_experiment(plan, Path(tmp))
    print("wrote", ", ".join(sorted(files)))
    with open(files["rmse_sweep.csv"]) as fh:
        for row in csv.DictReader(fh):
            coop = "coop" if row["cooperative"] == "1" else "noncoop"
            print(f"  {float(row['anchor_power']):5.1f} W  {row['algorithm']:4s} {coop:7s} "
                  f"RMSE {100 * float(row['rmse_m']):6.2f} cm")
    manifest = json.loads(files["manifest.json"].read_text())
    print("master seed", manifest["seeds"]["master"], "->", manifest["seeds"]["derivation"])
