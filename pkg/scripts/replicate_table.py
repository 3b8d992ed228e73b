"""Mean (sd) of the reserve metrics per scenario and model over seeded replications.

    python3 scripts/replicate_table.py --scenarios beta alpha delta --seeds 1 5
"""

import argparse
import json
import sys
import time

import numpy as np

from hazard_reserving.cli import write_summary_table
from hazard_reserving.pipeline import PipelineConfig, run_scenario, summarise
from hazard_reserving.simulate import SimulationConfig

METRICS = ("R_tot", "R_cell", "R_cal", "crps")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", nargs="+", default=["beta", "alpha", "delta"])
    ap.add_argument("--models", nargs="+", default=["cl", "cox", "gbm"])
    ap.add_argument("--seeds", nargs=2, type=int, default=[1, 5], metavar=("FIRST", "LAST"))
    ap.add_argument("--csv", help="also write the table as CSV")
    ap.add_argument("--rows", help="write every replication as JSON lines")
    args = ap.parse_args()

    cfg = PipelineConfig()
    rows = []
    for sc in args.scenarios:
        sim = SimulationConfig(scenario=sc)
        for seed in range(args.seeds[0], args.seeds[1] + 1):
            t0 = time.perf_counter()
            rows.extend(run_scenario(sc, seed, tuple(args.models), cfg, sim))
            print(f"{sc} seed {seed}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)

    summary = summarise(rows)
    print(f"{'scenario':<9}{'model':<6}" + "".join(f"{m:>20}" for m in METRICS))
    for s in summary:
        cells = []
        for m in METRICS:
            mean, sd = s[f"{m}_mean"], s[f"{m}_sd"]
            cells.append(f"{'--':>20}" if not np.isfinite(mean) else f"{mean:>11.4f} ({sd:.4f})")
        print(f"{s['scenario']:<9}{s['model']:<6}" + "".join(cells))
    if args.csv:
        write_summary_table(summary, args.csv)
    if args.rows:
        with open(args.rows, "w") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
