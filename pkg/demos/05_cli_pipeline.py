"""End-to-end CLI walk-through on generated files, all inside a temp dir.

Run with: python demos/05_cli_pipeline.py
"""

import json
import pathlib
import tempfile

from linkcausal.cli import main

tmp = pathlib.Path(tempfile.mkdtemp(prefix="linkcausal_demo_"))
print("working in", tmp)

# 1. simulate one cell and keep the generated data files
gen = tmp / "gen"
main(["simulate", "--scheme", "L", "--overlap", "0.8", "--mode", "known_link",
      "--reps", "1", "--seed", "3", "--n-a", "60", "--n-b", "60",
      "--set", "iterations=100", "--set", "burn_in=50",
      "--write-data", "--no-traces", "--threads", "1", "--out", str(gen)])
data = gen / "data"
file_a = next(data.glob("file_a_*.csv"))
file_b = next(data.glob("file_b_*.csv"))

# 2. define the linking schema for those files
schema = tmp / "schema.cfg"
schema.write_text(
    "link_fields = first_name:string:0.95, last_name:string:0.95,"
    " birth_date:nominal, birth_year:nominal\n"
    "outcome_column = y\ncovariate_columns = x1, x2\ntreatment_column = w\n")

# 3. link the two files and estimate the effect; rid gives truth-based checks
run = tmp / "run"
main(["link", "--file-a", str(file_a), "--file-b", str(file_b),
      "--schema", str(schema), "--mode", "joint", "--seed", "11",
      "--set", "iterations=200", "--set", "burn_in=100",
      "--truth", "rid", "--out", str(run)])
print(json.dumps(json.loads((run / "summary.json").read_text()), indent=1))

# 4. summarize the trace and write a histogram grid for external plotting
rep = tmp / "report"
main(["report", "--traces", str(run / "trace.csv"), "--out", str(rep),
      "--density-grid", "12"])
print("\nwrote", sorted(p.name for p in rep.iterdir()))
