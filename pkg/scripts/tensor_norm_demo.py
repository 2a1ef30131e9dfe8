"""Single-instance look at the solver: value, winning seed family, restart agreement,
and for d = 3 the certified grid value next to it."""

import argparse

from tensorconc import DistributionSpec, make_spectrum, sample
from tensorconc.tensornorm import DeviationProblem, SolverConfig, grid_oracle, maximize_deviation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--p", type=int, default=4)
    ap.add_argument("--restarts", type=int, default=64)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    spec = DistributionSpec("gaussian", make_spectrum("identity", a.d))
    prob = DeviationProblem(sample(spec, a.n, a.seed), spec, a.p, "absolute" if a.p % 2 else "signed")
    res = maximize_deviation(prob, SolverConfig(restarts=a.restarts), seed=a.seed)
    print(res.to_json())
    if a.d in (2, 3):
        print("grid value", grid_oracle(prob, 200_000 if a.d == 3 else 100_000))


if __name__ == "__main__":
    main()
