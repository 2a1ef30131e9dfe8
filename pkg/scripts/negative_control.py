"""Student-t against Gaussian on the same p = 2 grid: sandwich ratios by d and N."""

import argparse
import os

from tensorconc.acceptance import load_suite_config
from tensorconc.harness import SweepPlan, run_sweep, sandwich_check, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dof", type=float)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    a = ap.parse_args()
    nc = load_suite_config("gaussian-sandwich")["negative_control"]
    dof = a.dof or nc["dof"]
    plan = SweepPlan(("student_t", "gaussian"), [{"kind": "identity", "dims": nc["dims"]}], nc["ns"],
                     (nc["p"],), nc["trials"], nc["base_seed"], dof=dof)
    rows = summarize(plan, run_sweep(plan, workers=a.workers))
    for fam in ("student_t", "gaussian"):
        sub = [s for s in rows if s.cell.family == fam]
        print(f"{fam}: max/min ratio {sandwich_check(sub).spread:.3f}")
        for d in nc["dims"]:
            print(f"  d={d:<4}", " ".join(f"{s.ratio:6.3f}" for s in sub if s.cell.d == d))


if __name__ == "__main__":
    main()
