"""Log-log slopes of the mean deviation in N (fixed r) and in d (fixed small N).

Also fits the two-term model a sqrt(d/N) + b d^(p/2)/N to the d sweep, which shows
how far the small-N cells sit from the pure r^(p/2)/N regime.
"""

import argparse
import os

import numpy as np

from tensorconc.harness import SweepPlan, fit_loglog_slope, fit_points, run_sweep, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 16, 32, 64])
    a = ap.parse_args()

    plan = SweepPlan(("gaussian",), [{"kind": "identity", "dims": [4]}], [2 ** k for k in range(6, 13)],
                     (2,), a.trials, 3101)
    rows = summarize(plan, run_sweep(plan, workers=a.workers))
    pts, dropped = fit_points(rows, "n")
    print("N sweep:", fit_loglog_slope(pts, "N", "mean"), "dropped", dropped)

    plan = SweepPlan(("gaussian",), [{"kind": "identity", "dims": a.dims}], (a.n,), (2, 4), a.trials, 3102)
    rows = summarize(plan, run_sweep(plan, workers=a.workers))
    for p in (2, 4):
        sub = [s for s in rows if s.p == p]
        pts, dropped = fit_points(sub, "d")
        fit = fit_loglog_slope(pts, "d", "mean")
        d = np.array([s.cell.d for s in sub], dtype=float)
        y = np.array([s.mean for s in sub])
        A = np.column_stack([np.sqrt(d / a.n), d ** (p / 2) / a.n])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        local = [np.log(y[i + 1] / y[i]) / np.log(d[i + 1] / d[i]) for i in range(len(d) - 1)]
        print(f"p={p}: slope {fit.slope:.3f} (target {p / 2}), r^2 {fit.r_squared:.4f}, dropped {dropped}")
        print(f"      means {np.round(y, 4).tolist()}")
        print(f"      local slopes {np.round(local, 3).tolist()}")
        print(f"      two-term fit: {coef[0]:.3f} sqrt(d/N) + {coef[1]:.3f} d^(p/2)/N")


if __name__ == "__main__":
    main()
