"""Gaussian sandwich sweep: mean deviation over the lower rate, per cell and per p.

    python3 scripts/sandwich.py [--trials 50] [--workers 4] [--out runs/sandwich]
"""

import argparse
import os
import time

from tensorconc.acceptance import load_suite_config
from tensorconc.harness import (SweepPlan, run_metadata, run_sweep, sandwich_check, summarize,
                                write_outputs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default="runs/sandwich")
    a = ap.parse_args()

    sweep = load_suite_config("gaussian-sandwich")["sweep"]
    if a.trials:
        sweep["trials"] = a.trials
    plan = SweepPlan.from_json({**sweep, "output_dir": a.out})
    t0 = time.time()
    records = run_sweep(plan, workers=a.workers)
    rows = summarize(plan, records)
    write_outputs(a.out, records, rows, run_metadata(plan, t0, time.time(), a.workers), force=True)

    print(f"{'cell':<48} {'mean':>10} {'ratio':>8} {'guedon/thm1':>12} {'even/thm1':>10}")
    for s in rows:
        print(f"{s.cell.label():<48} {s.mean:>10.4g} {s.ratio:>8.3f} "
              f"{s.competing_guedon / s.rate_thm1:>12.3f} {s.competing_even / s.rate_thm1:>10.3f}")
    for p, (lo, hi, spread) in sandwich_check(rows).per_p.items():
        print(f"p={p}: ratio in [{lo:.3f}, {hi:.3f}], max/min {spread:.3f}")
    print(f"{time.time() - t0:.1f} s")


if __name__ == "__main__":
    main()
