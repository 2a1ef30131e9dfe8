"""Monte Carlo sweeps over (family, spectrum, d, N, p) cells plus the summary statistics
and property checks built on them."""

from __future__ import annotations

import io
import itertools
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from tensorconc import __version__
from tensorconc.covmodel import effective_rank, make_spectrum, operator_norm
from tensorconc.errors import InvalidParameterError, TensorConcError, UnsupportedError
from tensorconc.rates import (
    K_GAUSS,
    TensorRateInputs,
    competing_even_rate,
    competing_guedon_rate,
    prop31_lower_rate,
    thm1_expectation_rate,
)
from tensorconc.sampling import EXACT_ENUM_MAX_D, FAMILIES, DistributionSpec, Sample, generator_id, sample
from tensorconc.tensornorm import (
    VARIANTS,
    DeviationProblem,
    SolverConfig,
    _ascend,
    _normalize,
    exact_oracle_p2,
    maximize_deviation,
)

MASK64 = (1 << 64) - 1

# splitmix64 constants; the two multipliers are odd so x -> x * C is a bijection mod 2^64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_CELL = np.uint64(0xD6E8FEB86659FD93)
_TRIAL = np.uint64(0xA0761D6478BD642F)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seeds(base_seed: int, cell_index, trial_index) -> np.ndarray:
    """Vectorized derive_seed; cell_index and trial_index broadcast against each other.

    h0 = mix(base + golden); h1 = mix(h0 ^ cell * C_cell); seed = mix(h1 ^ trial * C_trial).
    mix is the splitmix64 finalizer, a bijection on 64-bit words.
    """
    if not 0 <= int(base_seed) <= MASK64:
        raise InvalidParameterError("base_seed must be a 64-bit unsigned integer")
    c = np.asarray(cell_index, dtype=np.uint64)
    t = np.asarray(trial_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(np.array([int(base_seed)], dtype=np.uint64) + _GOLDEN)
        h = _mix64(h ^ (c * _CELL))
        return _mix64(h ^ (t * _TRIAL))


def derive_seed(base_seed: int, cell_index: int, trial_index: int) -> int:
    return int(derive_seeds(base_seed, [cell_index], [trial_index])[0])


# ---------------------------------------------------------------- plans and records

@dataclass(frozen=True)
class SpectrumGrid:
    """One spectrum kind with its parameter values and the dimensions it is used at."""
    kind: str
    dims: tuple
    params: tuple = (None,)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "params", tuple(self.params))
        if not self.dims or not self.params:
            raise InvalidParameterError("spectrum grids need at least one dimension and parameter")
        if self.kind not in ("identity", "geometric", "polynomial"):
            raise InvalidParameterError(f"sweeps support identity/geometric/polynomial spectra, got {self.kind!r}")
        for d in self.dims:
            if d < 1:
                raise InvalidParameterError("dimensions must be positive")
        if self.kind == "identity" and self.params != (None,):
            raise InvalidParameterError("identity spectra take no parameter")
        if self.kind != "identity" and None in self.params:
            raise InvalidParameterError(f"{self.kind} spectra need numeric parameters")

    def spectrum(self, param, d):
        if self.kind == "geometric":
            return make_spectrum("geometric", d, ratio=param)
        if self.kind == "polynomial":
            return make_spectrum("polynomial", d, exponent=param)
        return make_spectrum("identity", d)


@dataclass(frozen=True)
class Cell:
    family: str
    spectrum_kind: str
    spectrum_param: float | None
    d: int
    n: int
    p: int
    variant: str
    dof: float | None = None

    def spec(self, grid: SpectrumGrid) -> DistributionSpec:
        spectrum = grid.spectrum(self.spectrum_param, self.d)
        return DistributionSpec(self.family, spectrum, self.dof if self.family == "student_t" else None)

    def label(self) -> str:
        param = "" if self.spectrum_param is None else f"({self.spectrum_param:g})"
        return (f"{self.family}/{self.spectrum_kind}{param}/d={self.d}/N={self.n}"
                f"/p={self.p}/{self.variant}")


@dataclass(frozen=True)
class SweepPlan:
    families: tuple
    spectra: tuple
    ns: tuple
    ps: tuple
    trials: int
    base_seed: int
    variant: str = "auto"
    solver: SolverConfig = field(default_factory=SolverConfig)
    dof: float | None = None
    k_subg: float = K_GAUSS
    timing: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "spectra", tuple(
            s if isinstance(s, SpectrumGrid) else SpectrumGrid(**s) for s in self.spectra))
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        object.__setattr__(self, "ps", tuple(int(p) for p in self.ps))
        if not (self.families and self.spectra and self.ns and self.ps):
            raise InvalidParameterError("sweep grids must be nonempty")
        for fam in self.families:
            if fam not in FAMILIES:
                raise InvalidParameterError(f"unknown family {fam!r}")
        if self.trials < 2:
            raise InvalidParameterError("trials must be >= 2")
        if not 0 <= int(self.base_seed) <= MASK64:
            raise InvalidParameterError("base_seed must be a 64-bit unsigned integer")
        if self.variant not in VARIANTS + ("auto",):
            raise InvalidParameterError(f"variant must be one of {VARIANTS + ('auto',)}")
        if any(n < 1 for n in self.ns) or any(p < 2 for p in self.ps):
            raise InvalidParameterError("N must be >= 1 and p >= 2")
        if "student_t" in self.families and self.dof is None:
            raise InvalidParameterError("student_t sweeps need dof")

    def variant_for(self, p: int) -> str:
        if self.variant == "auto":
            return "absolute" if p % 2 else "signed"
        return self.variant

    def all_cells(self) -> list[tuple[Cell, SpectrumGrid]]:
        out = []
        for fam, grid in itertools.product(self.families, self.spectra):
            for param, d, n, p in itertools.product(grid.params, grid.dims, self.ns, self.ps):
                cell = Cell(fam, grid.kind, param, d, n, p, self.variant_for(p),
                            self.dof if fam == "student_t" else None)
                out.append((cell, grid))
        return out

    def cell_problem(self, cell: Cell, grid: SpectrumGrid) -> str | None:
        """None when the cell can run, otherwise the reason it cannot."""
        try:
            spec = cell.spec(grid)
            spec.check_moment(cell.p)
        except TensorConcError as exc:
            return str(exc)
        if cell.p > 2 and spec.family in ("rademacher", "student_t") and cell.d > EXACT_ENUM_MAX_D:
            return f"exact {spec.family} moments need d <= {EXACT_ENUM_MAX_D}"
        if spec.family == "student_t" and cell.variant == "absolute" and cell.p % 2:
            return "student_t has no exact absolute odd moments"
        return None

    def cells(self) -> list[tuple[int, Cell, SpectrumGrid]]:
        """Runnable cells with their index in the full grid (the index feeds the seeds)."""
        return [(i, c, g) for i, (c, g) in enumerate(self.all_cells()) if self.cell_problem(c, g) is None]

    def invalid_cells(self) -> list[tuple[Cell, str]]:
        bad = []
        for c, g in self.all_cells():
            why = self.cell_problem(c, g)
            if why is not None:
                bad.append((c, why))
        return bad

    def to_json(self) -> dict:
        obj = asdict(self)
        obj["spectra"] = [{"kind": s.kind, "dims": list(s.dims), "params": list(s.params)}
                          for s in self.spectra]
        for key in ("families", "ns", "ps"):
            obj[key] = list(obj[key])
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SweepPlan":
        obj = dict(obj)
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidParameterError(f"unknown plan keys: {sorted(unknown)}")
        spectra = []
        for s in obj.get("spectra", ()):
            if set(s) - {"kind", "dims", "params"}:
                raise InvalidParameterError(f"unknown spectrum keys: {sorted(set(s) - {'kind', 'dims', 'params'})}")
            spectra.append(SpectrumGrid(s["kind"], tuple(s["dims"]), tuple(s.get("params", [None]))))
        obj["spectra"] = tuple(spectra)
        if "solver" in obj:
            obj["solver"] = SolverConfig.from_json(obj["solver"])
        try:
            return cls(**obj)
        except TypeError as exc:
            raise InvalidParameterError(str(exc)) from None


@dataclass(frozen=True)
class TrialRecord:
    family: str
    spectrum_kind: str
    spectrum_param: float | None
    d: int
    n: int
    p: int
    variant: str
    trial: int
    derived_seed: int
    deviation: float
    restarts_agree_frac: float
    converged: bool
    wall_ms: float | None
    cell_index: int
    restarts_used: int
    converged_frac: float
    max_norm_p: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def cell_key(self):
        return (self.family, self.spectrum_kind, self.spectrum_param, self.d, self.n, self.p, self.variant)


CSV_COLUMNS = ("family", "spectrum_kind", "spectrum_param", "d", "N", "p", "variant", "trial",
               "derived_seed", "deviation", "restarts_agree_frac", "converged", "wall_ms",
               "restarts_used", "converged_frac", "max_norm_p", "status")


def _fmt(x) -> str:
    # repr is locale independent and round-trips
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _trial_row(r: TrialRecord) -> list[str]:
    vals = (r.family, r.spectrum_kind, r.spectrum_param, r.d, r.n, r.p, r.variant, r.trial,
            r.derived_seed, r.deviation, r.restarts_agree_frac, r.converged, r.wall_ms,
            r.restarts_used, r.converged_frac, r.max_norm_p, r.status)
    return [_fmt(v) for v in vals]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def trials_csv(records: list[TrialRecord]) -> str:
    return _csv_text(CSV_COLUMNS, (_trial_row(r) for r in records))


# ---------------------------------------------------------------- running

def _solve(cell: Cell, spec: DistributionSpec, smp: Sample, solver: SolverConfig, seed: int):
    if cell.p == 2:
        return exact_oracle_p2(smp, spec), 1.0, True, 0, 1.0
    prob = DeviationProblem(smp, spec, cell.p, cell.variant)
    res = maximize_deviation(prob, solver, seed=seed)
    return res.value, res.restarts_agree_frac, res.converged, res.restarts_used, res.converged_frac


def _run_cell(args) -> list[TrialRecord]:
    index, cell, grid, plan = args
    spec = cell.spec(grid)
    seeds = derive_seeds(plan.base_seed, index, np.arange(plan.trials))
    out = []
    for t in range(plan.trials):
        seed = int(seeds[t])
        t0 = time.perf_counter()
        smp = sample(spec, cell.n, seed)
        max_norm_p = float(np.max(np.sum(smp.data ** 2, axis=1)) ** (cell.p / 2))
        try:
            value, agree, conv, used, conv_frac = _solve(cell, spec, smp, plan.solver, seed)
            status = "ok" if math.isfinite(value) else "nonfinite"
        except (ArithmeticError, np.linalg.LinAlgError, UnsupportedError) as exc:
            value, agree, conv, used, conv_frac = math.nan, 0.0, False, 0, 0.0
            status = type(exc).__name__
        wall = round((time.perf_counter() - t0) * 1000.0, 3) if plan.timing else None
        out.append(TrialRecord(cell.family, cell.spectrum_kind, cell.spectrum_param, cell.d, cell.n,
                               cell.p, cell.variant, t, seed, float(value), float(agree), bool(conv),
                               wall, index, int(used), float(conv_frac), max_norm_p, status))
    return out


def run_sweep(plan: SweepPlan, workers: int = 1) -> list[TrialRecord]:
    """Every trial of every runnable cell, sorted by (cell index, trial).

    Cells the plan cannot run are skipped; SweepPlan.invalid_cells lists them.
    The result does not depend on `workers`: seeds are derived up front and records sorted.
    """
    jobs = [(i, c, g, plan) for i, c, g in plan.cells()]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        chunks = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_run_cell, jobs))
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.cell_index, r.trial))
    return records


def group_by_cell(records: list[TrialRecord]) -> dict[int, list[TrialRecord]]:
    out: dict[int, list[TrialRecord]] = {}
    for r in records:
        out.setdefault(r.cell_index, []).append(r)
    return out


# ---------------------------------------------------------------- statistics

def mean_deviation(records) -> tuple[float, float]:
    """Sample mean and normal 95% halfwidth 1.96 sd / sqrt(T). Accepts records or floats."""
    values = [r.deviation if isinstance(r, TrialRecord) else float(r) for r in records]
    if len(values) < 2:
        raise InvalidParameterError("mean_deviation needs at least 2 values")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values)
    return mean, 1.96 * sd / math.sqrt(len(values))


@dataclass(frozen=True)
class SummaryRow:
    cell: Cell
    cell_index: int
    trials: int
    failed: int
    mean: float
    halfwidth95: float
    rate_thm1: float
    rate_prop31: float
    ratio: float
    competing_guedon: float | None
    competing_even: float | None
    max_norm_moment: float
    min_agree_frac: float

    @property
    def p(self) -> int:
        return self.cell.p


SUMMARY_COLUMNS = ("family", "spectrum_kind", "spectrum_param", "d", "N", "p", "variant", "trials",
                   "failed", "mean", "halfwidth95", "rate_thm1", "rate_prop31", "ratio",
                   "competing_guedon", "competing_even", "max_norm_moment", "min_agree_frac")


def summarize(plan: SweepPlan, records: list[TrialRecord]) -> list[SummaryRow]:
    lookup = {i: (c, g) for i, c, g in plan.cells()}
    rows = []
    for index, recs in sorted(group_by_cell(records).items()):
        cell, grid = lookup[index]
        spectrum = grid.spectrum(cell.spectrum_param, cell.d)
        good = [r for r in recs if r.ok]
        if len(good) >= 2:
            mean, hw = mean_deviation(good)
        else:
            mean, hw = math.nan, math.nan
        op, r_eff = operator_norm(spectrum), effective_rank(spectrum)
        inputs = TensorRateInputs(op, r_eff, cell.n, cell.p, k_subg=plan.k_subg)
        upper, lower = thm1_expectation_rate(inputs), prop31_lower_rate(inputs)
        mnm = statistics.fmean(r.max_norm_p for r in recs)
        guedon = competing_guedon_rate(op, cell.p, cell.n, mnm) if cell.n >= 2 else None
        even = competing_even_rate(op, r_eff, cell.n, cell.p, cell.d) if cell.n >= 2 else None
        rows.append(SummaryRow(cell, index, len(recs), len(recs) - len(good), mean, hw, upper, lower,
                               mean / lower, guedon, even, mnm,
                               min((r.restarts_agree_frac for r in good), default=math.nan)))
    return rows


def summary_csv(rows: list[SummaryRow]) -> str:
    def row(s: SummaryRow):
        c = s.cell
        vals = (c.family, c.spectrum_kind, c.spectrum_param, c.d, c.n, c.p, c.variant, s.trials,
                s.failed, s.mean, s.halfwidth95, s.rate_thm1, s.rate_prop31, s.ratio,
                s.competing_guedon, s.competing_even, s.max_norm_moment, s.min_agree_frac)
        return [_fmt(v) for v in vals]
    return _csv_text(SUMMARY_COLUMNS, (row(s) for s in rows))


def run_metadata(plan: SweepPlan, started: float, finished: float, workers: int) -> dict:
    spec_ids = sorted({generator_id(DistributionSpec(c.family, g.spectrum(c.spectrum_param, c.d),
                                                     c.dof))
                       for _, c, g in plan.cells()})
    return {
        "plan": plan.to_json(),
        "build_id": f"tensorconc-{__version__}",
        "generator_id": spec_ids,
        "workers": workers,
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(finished)),
        "skipped_cells": [{"cell": c.label(), "reason": why} for c, why in plan.invalid_cells()],
    }


def write_outputs(out_dir: str, records, rows, metadata, force: bool = False) -> list[str]:
    paths = [os.path.join(out_dir, name) for name in ("trials.csv", "summary.csv", "metadata.json")]
    if not force:
        existing = [p for p in paths if os.path.exists(p)]
        if existing:
            raise FileExistsError(f"refusing to overwrite {existing[0]} (use force)")
    os.makedirs(out_dir, exist_ok=True)
    texts = (trials_csv(records), summary_csv(rows), json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    for path, text in zip(paths, texts):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return paths


# ---------------------------------------------------------------- checks and fits

@dataclass(frozen=True)
class SandwichReport:
    ratios: tuple
    min_ratio: float
    max_ratio: float
    spread: float
    per_p: dict

    def to_json(self) -> dict:
        return asdict(self)


def _spread(vals):
    lo, hi = min(vals), max(vals)
    return lo, hi, hi / lo


def sandwich_check(rows) -> SandwichReport:
    """rho = mean / lower rate per cell; min, max and max/min overall and per p.

    rows: SummaryRow objects or (p, mean, rate) triples.
    """
    trip = [(s.p, s.mean, s.rate_prop31) if isinstance(s, SummaryRow) else tuple(s) for s in rows]
    if not trip:
        raise InvalidParameterError("sandwich_check needs at least one cell")
    ratios = tuple(m / r for _, m, r in trip)
    lo, hi, spread = _spread(ratios)
    per_p = {}
    for p in sorted({p for p, _, _ in trip}):
        per_p[p] = _spread([m / r for q, m, r in trip if q == p])
    return SandwichReport(ratios, lo, hi, spread, per_p)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    x_label: str = "x"
    y_label: str = "y"


def fit_loglog_slope(points, x_label: str = "x", y_label: str = "y") -> ScalingFit:
    """Ordinary least squares of ln y on ln x."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise InvalidParameterError("a log-log fit needs at least 3 points")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise InvalidParameterError("log-log fit needs positive values")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return ScalingFit(float(slope), float(intercept), r2, len(pts), x_label, y_label)


def fit_points(rows, axis: str, max_rel_halfwidth: float = 0.10):
    """(x, mean) pairs along `axis` ('n' or 'd'), dropping cells with halfwidth > 10% of the mean."""
    keep, dropped = [], []
    for s in rows:
        x = getattr(s.cell, axis)
        if s.halfwidth95 > max_rel_halfwidth * s.mean:
            dropped.append(x)
        else:
            keep.append((x, s.mean))
    return keep, dropped


def tail_exceedance(records, thresholds) -> list[float]:
    """Fraction of values strictly above each threshold; thresholds must be ascending."""
    values = np.array([r.deviation if isinstance(r, TrialRecord) else float(r) for r in records])
    th = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(th, th[1:])):
        raise InvalidParameterError("thresholds must be sorted ascending")
    if values.size == 0:
        raise InvalidParameterError("tail_exceedance needs at least one value")
    return [float(np.mean(values > t)) for t in th]


# ---------------------------------------------------------------- l_m norms

class _LmEvaluator:
    """f(v) = sum_i |<X_i, v>|^m with its gradient, in the interface _ascend expects."""

    def __init__(self, X, m):
        self.X = X
        self.m = m

    def value(self, V):
        return np.sum(np.abs(self.X @ V) ** self.m, axis=0)

    def value_and_grad(self, V):
        Y = self.X @ V
        A = np.abs(Y)
        f = np.sum(A ** self.m, axis=0)
        G = self.m * (self.X.T @ (A ** (self.m - 1) * np.sign(Y)))
        return f, G


def lm_norm_empirical(smp: Sample, index: str, m: float, V=None,
                      cfg: SolverConfig | None = None, seed: int = 0) -> float:
    """sup over the index set of (sum_i |<X_i, v>|^m)^(1/m).

    index is "finite" (V holds the index vectors as rows) or "sphere".
    """
    if not m >= 1:
        raise InvalidParameterError("m must be >= 1")
    X = np.asarray(smp.data, dtype=float)
    if index == "finite":
        if V is None or np.asarray(V).size == 0:
            raise InvalidParameterError("finite index needs a nonempty V")
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return float(np.max(np.sum(np.abs(X @ V.T) ** m, axis=0) ** (1.0 / m)))
    if index != "sphere":
        raise InvalidParameterError(f"index must be 'finite' or 'sphere', got {index!r}")
    if m == 2:
        return float(np.linalg.norm(X, 2))
    return lm_sphere_ascent(X, m, cfg, seed)


def lm_sphere_ascent(X, m: float, cfg: SolverConfig | None = None, seed: int = 0) -> float:
    """Multi-start projected gradient ascent of v -> ||Xv||_m over the unit sphere."""
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if d == 1:
        return float(np.sum(np.abs(X[:, 0]) ** m) ** (1.0 / m))
    cfg = cfg or SolverConfig()
    norms = np.linalg.norm(X, axis=1)
    order = np.argsort(-norms, kind="stable")
    cols = [X[i] / norms[i] for i in order[: cfg.restarts // 2] if norms[i] > 0]
    _, _, Vt = np.linalg.svd(X, full_matrices=False)
    cols += list(Vt[: max(1, cfg.restarts // 4)])
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    n_rand = max(1, cfg.restarts - len(cols))
    cols += list(_normalize(rng.standard_normal((d, n_rand))).T)
    V0 = np.array(cols).T
    _, F, _, _ = _ascend(_LmEvaluator(X, m), V0, np.ones(V0.shape[1]), cfg)
    return float(np.max(F) ** (1.0 / m))


# ---------------------------------------------------------------- other checks

def rademacher_tail_check(z, k: int, trials: int, seed: int, t: float | None = None):
    """Monte Carlo rate of |sum eps_i z_i| > sum_{i<=k} z*_i + t (sum_{i>k} z*_i^2)^(1/2).

    z* is the non-increasing rearrangement of |z|. Returns (empirical, 2 exp(-t^2/2), t).
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    n = z.size
    if not 1 <= k <= n:
        raise InvalidParameterError(f"k must lie in [1, {n}], got {k}")
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    t = math.sqrt(k) if t is None else float(t)
    if not t > 0:
        raise InvalidParameterError("t must be positive")
    zs = np.sort(np.abs(z))[::-1]
    bound = float(np.sum(zs[:k]) + t * math.sqrt(float(np.sum(zs[k:] ** 2))))
    # rounding guard so the k = N case cannot register spurious violations
    slack = 1e-12 * float(np.sum(zs))
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    chunk = max(1, min(trials, 2**22 // max(1, n)))
    hits, done = 0, 0
    while done < trials:
        b = min(chunk, trials - done)
        eps = rng.integers(0, 2, size=(b, n), dtype=np.int8).astype(float) * 2.0 - 1.0
        hits += int(np.count_nonzero(np.abs(eps @ z) > bound + slack))
        done += b
    return hits / trials, 2.0 * math.exp(-t * t / 2.0), t


def max_norm_samples(spec: DistributionSpec, n: int, p: float, trials: int, seed: int) -> np.ndarray:
    """max_i ||X_i||^p for `trials` independent N-blocks.

    Block t uses seed derive_seed(seed, 0, t), so blocks at different n share a prefix of rows.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    seeds = derive_seeds(seed, 0, np.arange(trials))
    out = np.empty(trials)
    for t in range(trials):
        X = sample(spec, n, int(seeds[t])).data
        out[t] = np.max(np.sum(X * X, axis=1)) ** (p / 2.0)
    return out


def max_norm_moment(spec: DistributionSpec, n: int, p: float, trials: int, seed: int) -> float:
    """Monte Carlo estimate of E max_i ||X_i||^p."""
    return float(np.mean(max_norm_samples(spec, n, p, trials, seed)))
