#!/usr/bin/env python3
"""End-to-end evaluation on the bundled mini dataset.

The mini dataset under tests/data/mini follows the standard layout (models,
scene ground truth, 16-bit depth PNGs, a target list) and ships with three
submissions. This script scores two of them through the Python API; the
command-line equivalent is shown at the end.
"""

from pathlib import Path

from poseval import EvalConfig
from poseval.dataset_io import format_report_table
from poseval.pipeline import evaluate_submissions

MINI = Path(__file__).resolve().parents[1] / "tests" / "data" / "mini"

config = EvalConfig(datasets={"mini": MINI}, workers=1)

print("=== ground truth submitted as its own estimate ===")
report = evaluate_submissions(config, {"mini": MINI / "submissions" / "perfect.csv"})
print(format_report_table(report))

print("=== one cube off by 23% of its diameter ===")
report = evaluate_submissions(config, {"mini": MINI / "submissions" / "mixed.csv"})
print(format_report_table(report))
dataset = report.datasets[0]
print("per-threshold surface-distance recalls:", dataset.mssd_grid.recalls)

print("""
Command-line equivalent:

    poseval evaluate --dataset mini=tests/data/mini \\
        --submission tests/data/mini/submissions/perfect.csv \\
        --out /tmp/poseval-report

    poseval report /tmp/poseval-report/report.json
""")
