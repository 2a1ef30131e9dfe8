"""Command line: `tensorconc rate|simulate|verify`.

Exit codes: 0 success, 1 verification or solver failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from tensorconc import rates
from tensorconc.errors import TensorConcError

SCHEMA_VERSION = 1
SEED_ENV = "TENSORCONC_SEED"
SUITES = ("gaussian-sandwich", "slopes", "p2-oracle", "chaining", "lm-bound", "hoeffding", "phi")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- rate

def _tensor(a, need_u=False):
    return rates.TensorRateInputs(_req(a, "opnorm"), _req(a, "rank"), _req(a, "n"), _req(a, "p"),
                                  _req(a, "u") if need_u else a.u,
                                  rates.K_GAUSS if a.k is None else a.k)


def _process(a, need_u=False, need_m=False):
    return rates.ProcessRateInputs(_req(a, "gamma"), _req(a, "dpsi2"), _req(a, "n"), _req(a, "p"),
                                   _req(a, "u") if need_u else a.u, _req(a, "m") if need_m else a.m)


RATES = {
    "thm1-exp": lambda a: rates.thm1_expectation_rate(_tensor(a)),
    "thm1-tail": lambda a: rates.thm1_tail_rate(_tensor(a, need_u=True)),
    "prop31": lambda a: rates.prop31_lower_rate(_tensor(a)),
    "thm2-exp": lambda a: rates.thm2_expectation_rate(_process(a)),
    "thm2-tail": lambda a: rates.thm2_tail_rate(_process(a, need_u=True)),
    "thm2-alt-tail": lambda a: rates.thm2_alt_tail_rate(_process(a, need_u=True)),
    "remark25": lambda a: rates.remark25_rate(_process(a)),
    "lm-tail": lambda a: rates.remark41_lm_tail_rate(_process(a, need_u=True, need_m=True)),
    "guedon": lambda a: rates.competing_guedon_rate(_req(a, "opnorm"), _req(a, "p"), _req(a, "n"),
                                                    _req(a, "max_norm_moment")),
    "even": lambda a: rates.competing_even_rate(_req(a, "opnorm"), _req(a, "rank"), _req(a, "n"),
                                                _req(a, "p"), _req(a, "dim")),
    "kl-p2": lambda a: rates.kl_p2_rate(_req(a, "opnorm"), _req(a, "rank"), _req(a, "n")),
}


def _req(a, name):
    val = getattr(a, name)
    if val is None:
        raise UsageError(f"rate {a.name} needs --{name.replace('_', '-')}")
    return val


def cmd_rate(a) -> int:
    value = RATES[a.name](a)
    if a.json:
        print(json.dumps({"rate": a.name, "value": value}))
    else:
        print(format(value, ".12g"))
    return 0


# ---------------------------------------------------------------- simulate

CONFIG_KEYS = {"schema_version", "sweep", "solver", "output_dir"}


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(f"schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    if "sweep" not in cfg:
        raise UsageError("config needs a 'sweep' block")
    return cfg


def resolve_seed(flag, config_seed):
    """flag > environment > config."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return config_seed


def build_plan(cfg: dict, seed_flag=None, out_flag=None):
    from tensorconc.harness import SweepPlan

    sweep = dict(cfg["sweep"])
    if "solver" in sweep:
        raise UsageError("put solver settings in the top-level 'solver' block")
    if "solver" in cfg:
        sweep["solver"] = cfg["solver"]
    sweep["base_seed"] = resolve_seed(seed_flag, sweep.get("base_seed"))
    if sweep["base_seed"] is None:
        raise UsageError("no base_seed in config, flag or environment")
    sweep["output_dir"] = out_flag or cfg.get("output_dir")
    if not sweep["output_dir"]:
        raise UsageError("no output directory (config output_dir or --out)")
    return SweepPlan.from_json(sweep)


def _print_summary(rows):
    head = f"{'cell':<52} {'mean':>11} {'hw95':>10} {'ratio':>8} {'fail':>4}"
    print(head)
    for s in rows:
        print(f"{s.cell.label():<52} {s.mean:>11.5g} {s.halfwidth95:>10.3g} {s.ratio:>8.4g} {s.failed:>4d}")


def cmd_simulate(a) -> int:
    from tensorconc.harness import run_metadata, run_sweep, summarize, write_outputs

    plan = build_plan(load_config(a.config), a.seed, a.out)
    bad = plan.invalid_cells()
    if bad:
        cell, why = bad[0]
        raise UsageError(f"invalid cell {cell.label()}: {why}")
    out = plan.output_dir
    if not a.force:
        for name in ("trials.csv", "summary.csv", "metadata.json"):
            if os.path.exists(os.path.join(out, name)):
                raise UsageError(f"{os.path.join(out, name)} exists; pass --force to overwrite")
    workers = a.workers if a.workers is not None else (os.cpu_count() or 1)
    started = time.time()
    records = run_sweep(plan, workers=workers)
    rows = summarize(plan, records)
    write_outputs(out, records, rows, run_metadata(plan, started, time.time(), workers), force=True)
    _print_summary(rows)
    for s in rows:
        if s.failed * 2 > s.trials:
            print(f"solver failed in {s.failed}/{s.trials} trials of cell {s.cell.label()}", file=sys.stderr)
            return 1
    return 0


# ---------------------------------------------------------------- verify

def cmd_verify(a) -> int:
    from tensorconc.acceptance import run_suite

    report = run_suite(a.suite, workers=a.workers)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorconc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rate", help="evaluate a closed-form rate")
    r.add_argument("name", choices=sorted(RATES))
    for flag in ("opnorm", "rank", "p", "u", "k", "gamma", "dpsi2", "m", "max-norm-moment"):
        r.add_argument(f"--{flag}", type=float)
    r.add_argument("--n", type=int)
    r.add_argument("--dim", type=int)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_rate)

    s = sub.add_parser("simulate", help="run a Monte Carlo sweep from a JSON config")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--force", action="store_true")
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=lambda x: int(x, 0))
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run an acceptance suite at its pinned config")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--workers", type=int, default=1)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, TensorConcError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
