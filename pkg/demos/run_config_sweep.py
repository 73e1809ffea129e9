"""
Config files, metrics and a small sweep
=======================================

Everything the command line does is available from Python.  This writes a
config, runs it, reads the metrics CSV back and compares two seeds.
"""

import json
from pathlib import Path

from tsc_uda.harness.cli import compare, main
from tsc_uda.harness.metrics import read_metrics

out = Path("demo_runs")
out.mkdir(exist_ok=True)
config = out / "short.ini"
config.write_text("""\
[model]
variant = DANN

[run]
total_steps = 600
eval_interval = 50
""")

# equivalent to: tsc-uda sweep demo_runs/short.ini --seeds 0 1 --output-dir demo_runs/sweep
main(["sweep", str(config), "--seeds", "0", "1", "--output-dir", str(out / "sweep")])

m = read_metrics(out / "sweep" / "seed_0" / "metrics.csv")
print("logged steps:", m["step"].astype(int).tolist())
print("winner pseudo-label accuracy:", m["pl_winner_acc"].round(3).tolist())

agg = json.loads((out / "sweep" / "aggregate.json").read_text())
print("student accuracy across seeds:", agg["final"]["student_acc"])

delta = compare(out / "sweep" / "seed_0" / "metrics.csv", out / "sweep" / "seed_1" / "metrics.csv")
print("final teacher accuracy, seed 1 minus seed 0:", delta["deltas"]["teacher_acc"]["final"])
