"""Generic chaining on finite metric spaces, Orlicz and graded norms, and the Young function phi."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.special import gammaln

from tensorconc.errors import (
    InvalidParameterError,
    NotInOrliczSpaceError,
    UnsupportedError,
)
from tensorconc.sampling import (
    DistributionSpec,
    EXACT_ENUM_MAX_D,
    _sign_patterns,
    coordinate_moments,
    _independent_sum_moments,
    psi2_norm,
    sphere_coord_abs_moment,
    student_abs_moment,
)

TRIANGLE_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------- metric spaces

@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    distances: np.ndarray = field(repr=False)
    labels: list | None = field(default=None, repr=False)

    def __post_init__(self):
        D = np.array(self.distances, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
            raise InvalidParameterError("distance matrix must be square and non-empty")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise InvalidParameterError("distances must be finite and nonnegative")
        if np.any(np.diag(D) != 0):
            raise InvalidParameterError("distance matrix must have a zero diagonal")
        if not np.array_equal(D, D.T):
            raise InvalidParameterError("distance matrix must be symmetric")
        # d(i,k) <= d(i,j) + d(j,k) for all triples
        n = D.shape[0]
        for j in range(n):
            if np.any(D > D[:, j:j + 1] + D[j:j + 1, :] + TRIANGLE_TOL):
                raise InvalidParameterError("triangle inequality violated")
        D.setflags(write=False)
        object.__setattr__(self, "distances", D)

    @property
    def n_points(self) -> int:
        return self.distances.shape[0]

    def scaled(self, t: float) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.distances * t, self.labels)

    def subspace(self, idx) -> "FiniteMetricSpace":
        idx = list(idx)
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        return FiniteMetricSpace(self.distances[np.ix_(idx, idx)], labels)

    def to_json(self) -> dict:
        return {"n_points": self.n_points, "distances": self.distances.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteMetricSpace":
        n = obj["n_points"]
        return cls(np.asarray(obj["distances"], dtype=float).reshape(n, n))


def euclidean_space(points) -> FiniteMetricSpace:
    P = np.asarray(points, dtype=float)
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    return FiniteMetricSpace(D, [row for row in P])


@dataclass(frozen=True)
class AdmissibleSequence:
    levels: tuple[tuple[int, ...], ...]

    @property
    def S(self) -> int:
        return len(self.levels) - 1

    def to_json(self) -> dict:
        return {"levels": [list(level) for level in self.levels]}

    @classmethod
    def from_json(cls, obj: dict) -> "AdmissibleSequence":
        return cls(tuple(tuple(level) for level in obj["levels"]))


def level_cap(s: int, n: int) -> int:
    """min(2^(2^s), n), with |F_0| = 1."""
    if s == 0:
        return 1
    if s >= 6:  # 2^64 exceeds any finite space we handle
        return n
    return min(2 ** (2 ** s), n)


def check_admissible(seq: AdmissibleSequence, n_points: int) -> None:
    """Raise if ``seq`` is not an admissible sequence covering all ``n_points``."""
    levels = [set(level) for level in seq.levels]
    if not levels or len(levels[0]) != 1:
        raise InvalidParameterError("|F_0| must equal 1")
    for s, level in enumerate(levels):
        if len(level) != len(seq.levels[s]):
            raise InvalidParameterError(f"level {s} has repeated indices")
        if not level <= set(range(n_points)):
            raise InvalidParameterError(f"level {s} has out-of-range indices")
        if s > 0 and len(level) > 2 ** (2 ** s):
            raise InvalidParameterError(f"|F_{s}| = {len(level)} exceeds 2^(2^{s})")
        if s > 0 and not levels[s - 1] <= level:
            raise InvalidParameterError(f"F_{s - 1} is not contained in F_{s}")
    if levels[-1] != set(range(n_points)):
        raise InvalidParameterError("final level must be the whole space")


def metric_center(space: FiniteMetricSpace) -> int:
    """Index minimizing the eccentricity max_j d(i, j); lowest index on ties."""
    return int(np.argmin(space.distances.max(axis=1)))


def build_admissible_sequence(space: FiniteMetricSpace) -> AdmissibleSequence:
    """Greedy sequence: F_0 = metric 1-center, then farthest-first insertion."""
    D = space.distances
    n = space.n_points
    order = [metric_center(space)]
    mind = D[order[0]].copy()
    levels = [tuple(order)]
    s = 0
    while len(order) < n:
        s += 1
        target = level_cap(s, n)
        while len(order) < target:
            nxt = int(np.argmax(mind))
            order.append(nxt)
            mind = np.minimum(mind, D[nxt])
        levels.append(tuple(order))
    return AdmissibleSequence(tuple(levels))


def chaining_sums(space: FiniteMetricSpace, seq: AdmissibleSequence) -> np.ndarray:
    """sum_s 2^(s/2) d(t, F_s) for every point t."""
    D = space.distances
    total = np.zeros(space.n_points)
    for s, level in enumerate(seq.levels):
        total += 2.0 ** (s / 2) * D[:, list(level)].min(axis=1)
    return total


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    sequence: AdmissibleSequence
    method: str


def _exhaustive_gamma2(space: FiniteMetricSpace) -> GammaEstimate:
    D = space.distances
    n = space.n_points
    best = (math.inf, None)
    for c in range(n):
        d0 = D[c]
        rest = [i for i in range(n) if i != c]
        for k in range(0, min(3, n - 1) + 1):
            for extra in combinations(rest, k):
                F1 = (c,) + extra
                val = float(np.max(d0 + math.sqrt(2.0) * D[:, list(F1)].min(axis=1)))
                if val < best[0]:
                    levels = [(c,), F1]
                    if len(F1) < n:
                        levels.append(F1 + tuple(i for i in rest if i not in extra))
                    best = (val, AdmissibleSequence(tuple(levels)))
    return GammaEstimate(best[0], best[1], "exhaustive")


def gamma2(space: FiniteMetricSpace, method: str = "greedy_ffp") -> GammaEstimate:
    """gamma_2 of a finite space: greedy upper bound, or exact infimum for n <= 6."""
    if method == "exhaustive":
        if space.n_points > 6:
            raise UnsupportedError("exhaustive gamma_2 is limited to n_points <= 6")
        if space.n_points == 1:
            return GammaEstimate(0.0, AdmissibleSequence(((0,),)), "exhaustive")
        return _exhaustive_gamma2(space)
    if method not in ("greedy_ffp", "net_based"):
        raise InvalidParameterError(f"unknown gamma_2 method {method!r}")
    seq = build_admissible_sequence(space)
    return GammaEstimate(float(chaining_sums(space, seq).max()), seq, method)


def dudley_sum(space: FiniteMetricSpace) -> float:
    """sum_s 2^(s/2) e_s with e_s the covering radius of the greedy level-s net."""
    seq = build_admissible_sequence(space)
    D = space.distances
    total = 0.0
    for s, level in enumerate(seq.levels):
        e = float(D[:, list(level)].min(axis=1).max())
        if e == 0.0:
            break
        total += 2.0 ** (s / 2) * e
    return total


# ---------------------------------------------------------------- norms of linear functionals

def orlicz_norm(moment_oracle: Callable[[float], float], alpha: float = 2.0, *,
                first_moment: float | None = None, rtol: float = 1e-10) -> float:
    """inf{c > 0 : E exp(|X|^alpha / c^alpha) <= 2} by bracketing and bisection.

    ``moment_oracle(c)`` returns E exp(|X|^alpha / c^alpha) (``inf`` is allowed).
    """
    if not 0 < alpha <= 2:
        raise InvalidParameterError(f"alpha must lie in (0, 2], got {alpha}")

    def ok(c):
        val = moment_oracle(c)
        return math.isfinite(val) and val <= 2.0

    lo = max(1e-12, first_moment or 0.0)
    if ok(lo):
        # only possible for alpha < 1 or a degenerate oracle; walk down to a failing c
        while ok(lo):
            lo *= 0.5
            if lo < 1e-300:
                return 0.0
        hi = 2.0 * lo
    else:
        hi = 2.0 * lo
        for _ in range(2000):
            if ok(hi):
                break
            lo, hi = hi, 2.0 * hi
            if not math.isfinite(hi):
                break
        else:
            hi = math.inf
        if not math.isfinite(hi) or not ok(hi):
            raise NotInOrliczSpaceError("E exp(|X|^alpha/c^alpha) exceeds 2 for every c tried")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _sigma(spec: DistributionSpec, v: np.ndarray) -> float:
    return math.sqrt(float(np.dot(spec.spectrum.as_array(), v * v)))


def lp_norm(spec: DistributionSpec, v, q: float) -> float:
    """||<X,v>||_{L_q} for real q >= 1."""
    if q < 1:
        raise InvalidParameterError(f"q must be >= 1, got {q}")
    spec.check_moment(q)
    v = np.asarray(v, dtype=float).reshape(-1)
    sigma = _sigma(spec, v)
    if sigma == 0.0:
        return 0.0
    fam = spec.family
    if fam == "gaussian":
        return sigma * _gauss_lq(q)
    if fam == "sphere":
        return sigma * math.sqrt(spec.d) * sphere_coord_abs_moment(q, spec.d) ** (1.0 / q)
    lam = spec.spectrum.as_array()
    a = np.sqrt(lam) * v
    if q == int(q) and int(q) % 2 == 0:
        m = _independent_sum_moments(a[:, None], coordinate_moments(spec, int(q)))[int(q), 0]
        return float(m) ** (1.0 / q)
    if fam == "rademacher":
        if spec.d > EXACT_ENUM_MAX_D:
            raise UnsupportedError(f"exact rademacher L_q norm limited to d <= {EXACT_ENUM_MAX_D}")
        s = _sign_patterns(spec.d) @ a
        return float(np.mean(np.abs(s) ** q)) ** (1.0 / q)
    nz = np.flatnonzero(a)
    if nz.size == 1:
        nu = spec.dof
        scale = abs(a[nz[0]]) * math.sqrt((nu - 2.0) / nu)
        return scale * student_abs_moment(q, nu) ** (1.0 / q)
    raise UnsupportedError("student_t L_q norms need an even integer q or a single active coordinate")


def _gauss_lq(q):
    q = np.asarray(q, dtype=float)
    return np.exp((0.5 * q * math.log(2.0) + gammaln(0.5 * (q + 1.0)) - 0.5 * math.log(math.pi)) / q)


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Maximize a unimodal f on [a, b] by golden-section search; returns (x, f(x))."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
    x = 0.5 * (a + b)
    return x, f(x)


def _graded_profile(spec: DistributionSpec, v: np.ndarray, q: float) -> float:
    def h(p):
        return lp_norm(spec, v, p) / math.sqrt(p)

    grid = np.arange(1.0, q, 0.25).tolist() + [float(q)]
    vals = [h(p) for p in grid]
    k = int(np.argmax(vals))
    best = vals[k]
    if len(grid) > 1:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        _, ref = golden_max(h, lo, hi, 1e-8)
        best = max(best, ref)
    return best


@lru_cache(maxsize=4096)
def _gauss_graded_factor(q: float) -> float:
    # sup_{1<=p<=q} ||Z||_p / sqrt(p) for standard normal Z
    grid = np.append(np.arange(1.0, q, 0.25), q)
    vals = _gauss_lq(grid) / np.sqrt(grid)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if grid.size > 1:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        _, ref = golden_max(lambda p: float(_gauss_lq(p) / math.sqrt(p)), lo, hi, 1e-8)
        best = max(best, ref)
    return best


def graded_norm(spec: DistributionSpec, v, q: float) -> float:
    """sup over p in [1, q] of ||<X,v>||_{L_p} / sqrt(p)."""
    if q < 1:
        raise InvalidParameterError(f"q must be >= 1, got {q}")
    spec.check_moment(q)
    v = np.asarray(v, dtype=float).reshape(-1)
    if q == 1:
        return lp_norm(spec, v, 1.0)
    if spec.family == "gaussian":
        return _sigma(spec, v) * _gauss_graded_factor(float(q))
    return _graded_profile(spec, v, q)


# ---------------------------------------------------------------- function classes

@dataclass(frozen=True, eq=False)
class FiniteFunctionClass:
    index_vectors: np.ndarray = field(repr=False)
    base_spec: DistributionSpec
    psi2_space: FiniteMetricSpace = field(repr=False)
    d_psi2: float
    symmetric: bool


def psi2_metric(V, spec: DistributionSpec) -> FiniteMetricSpace:
    """Distances ||<X, u - v>||_psi2 between the linear functionals indexed by rows of V."""
    V = np.asarray(V, dtype=float)
    if spec.family not in ("gaussian", "rademacher", "sphere"):
        raise UnsupportedError(f"psi2 metric not available for {spec.family}")
    n = V.shape[0]
    if spec.family == "gaussian":
        W = V * np.sqrt(spec.spectrum.as_array())
        diff = W[:, None, :] - W[None, :, :]
        D = math.sqrt(8.0 / 3.0) * np.sqrt(np.sum(diff * diff, axis=-1))
    else:
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = psi2_norm(spec, V[i] - V[j])
    return FiniteMetricSpace(D, [row for row in V])


def _is_symmetric_set(V: np.ndarray) -> bool:
    keys = {tuple(np.round(row, 12)) for row in V}
    return all(tuple(np.round(-row, 12)) in keys for row in V)


def function_class(V, spec: DistributionSpec) -> FiniteFunctionClass:
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != spec.d:
        raise InvalidParameterError(f"index vectors have dimension {V.shape[1]}, expected {spec.d}")
    space = psi2_metric(V, spec)
    d_psi2 = max(psi2_norm(spec, v) for v in V)
    return FiniteFunctionClass(V, spec, space, float(d_psi2), _is_symmetric_set(V))


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    stderr: float


def gaussian_width(cls: FiniteFunctionClass, trials: int, seed: int) -> WidthEstimate:
    """Monte Carlo E max_v <G, v> with G ~ N(0, Sigma)."""
    if cls.base_spec.family != "gaussian":
        raise UnsupportedError("gaussian_width needs a Gaussian base spec")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    W = (cls.index_vectors * np.sqrt(cls.base_spec.spectrum.as_array())).T
    chunk = max(1, min(trials, 2**22 // max(1, W.size)))
    maxima = []
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        G = rng.standard_normal((m, W.shape[0]))
        maxima.append((G @ W).max(axis=1))
        done += m
    x = np.concatenate(maxima)
    se = float(x.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return WidthEstimate(float(x.mean()), se)


def lambda_functional(cls: FiniteFunctionClass, s0: int, u: float) -> tuple[float, float]:
    """(Lambda_{s0,u}, tilde Lambda_{s0,u}) evaluated on the greedy psi2 admissible sequence.

    pi_s f is the element of F_s nearest to f in the (u^2 2^s) graded norm.
    Upper bounds only: the infimum over admissible sequences is not searched.
    """
    if s0 < 0 or u < 1:
        raise InvalidParameterError("need s0 >= 0 and u >= 1")
    V = cls.index_vectors
    spec = cls.base_spec
    seq = build_admissible_sequence(cls.psi2_space)
    n = V.shape[0]
    last = seq.S

    def graded_dist(q):
        G = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                G[i, j] = G[j, i] = graded_norm(spec, V[i] - V[j], q)
        return G

    sums = np.zeros(n)
    for s in range(s0, last + 1):
        if len(seq.levels[s]) == n:
            break
        G = graded_dist(u * u * 2.0 ** s)
        sums += 2.0 ** (s / 2) * G[:, list(seq.levels[s])].min(axis=1)
    lam = float(sums.max())

    q0 = u * u * 2.0 ** s0
    level = list(seq.levels[min(s0, last)])
    if len(level) == n:
        proj = range(n)
    else:
        G0 = graded_dist(q0)
        proj = [level[k] for k in np.argmin(G0[:, level], axis=1)]
    head = max(graded_norm(spec, V[j], q0) for j in set(proj))
    return lam, lam + 2.0 ** (s0 / 2) * head


# ---------------------------------------------------------------- Young function

@dataclass(frozen=True)
class YoungPhi:
    n: int
    m: float

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidParameterError("YoungPhi needs n >= 1 and m >= 1")


def phi(y: YoungPhi, x: float) -> float:
    """2^min{(sqrt(N) x)^(2/m), x^2} - 1."""
    if x < 0:
        raise InvalidParameterError("phi is defined on [0, inf)")
    e = min((math.sqrt(y.n) * x) ** (2.0 / y.m), x * x)
    return math.expm1(e * math.log(2.0))


def phi_inverse(y: YoungPhi, z: float) -> float:
    """max{sqrt(log2(1+z)), sqrt(log2(1+z)^m / N)}."""
    if z < 0:
        raise InvalidParameterError("phi_inverse is defined on [0, inf)")
    L = math.log1p(z) / math.log(2.0)
    return max(math.sqrt(L), math.sqrt(L ** y.m / y.n))


def phi_submultiplicativity_ratio(y: YoungPhi, x: float, z: float) -> float:
    """phi^-1(x z) / (phi^-1(x) + phi^-1(z)); bounded by a constant depending only on m."""
    den = phi_inverse(y, x) + phi_inverse(y, z)
    return phi_inverse(y, x * z) / den if den > 0 else 0.0


def to_json_str(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True)
