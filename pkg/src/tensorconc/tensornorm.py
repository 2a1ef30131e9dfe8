"""The deviation sup_{|v|=1} |N^-1 sum_i g(<X_i,v>) - E g(<X,v>)| with g(t) = t^p or |t|^p.

The supremum over the sphere is searched by multi-start projected gradient ascent.
Exact oracles cover p = 2 (dense eigensolver) and d in {2, 3} (angular grids).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from tensorconc.chaining import golden_max
from tensorconc.errors import InvalidParameterError, UnsupportedError
from tensorconc.sampling import (
    DistributionSpec,
    Sample,
    UNIT_TOL,
    moment_batch,
    moment_gradient_batch,
)

VARIANTS = ("signed", "absolute")
DENSE_MAX_D = 2048
NONMONOTONE_WINDOW = 10


@dataclass(frozen=True)
class DeviationProblem:
    sample: Sample
    spec: DistributionSpec
    p: int
    variant: str = "signed"

    def __post_init__(self):
        if self.sample.spec_digest != self.spec.digest():
            raise InvalidParameterError("sample was not drawn from this distribution spec")
        if int(self.p) != self.p or self.p < 2:
            raise InvalidParameterError(f"p must be an integer >= 2, got {self.p!r}")
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"variant must be one of {VARIANTS}")
        if self.sample.data.shape[1] != self.spec.d:
            raise InvalidParameterError("sample dimension does not match the spectrum")
        self.spec.check_moment(self.p)
        object.__setattr__(self, "p", int(self.p))

    @property
    def absolute(self) -> bool:
        return self.variant == "absolute"

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def even(self) -> bool:
        """objective(v) == objective(-v)"""
        return self.p % 2 == 0 or self.absolute


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 64
    max_iterations: int = 500
    convergence_tol: float = 1e-10
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    grid_resolution: int | None = None

    def __post_init__(self):
        if self.restarts < 1 or self.max_iterations < 1:
            raise InvalidParameterError("restarts and max_iterations must be positive")
        if not (self.convergence_tol > 0 and self.initial_step > 0 and self.sufficient_increase > 0):
            raise InvalidParameterError("tolerances and steps must be positive")
        if not 0 < self.shrink < 1:
            raise InvalidParameterError("shrink must lie in (0, 1)")
        if self.grid_resolution is not None and self.grid_resolution < 1:
            raise InvalidParameterError("grid_resolution must be positive")

    def resolution_for(self, d: int) -> int:
        if self.grid_resolution is not None:
            return self.grid_resolution
        return 100_000 if d == 2 else 200_000

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SolverConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParameterError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class MaximizerResult:
    value: float
    argmax: np.ndarray = field(repr=False)
    sign_branch: int
    iterations_used: int
    restarts_used: int
    seed_provenance: str
    converged: bool
    # diagnostics beyond the winning branch
    restarts_agree_frac: float = 1.0
    converged_frac: float = 1.0

    def to_json(self) -> str:
        obj = asdict(self)
        obj["argmax"] = [float(x) for x in self.argmax]
        return json.dumps(obj)


def _ipow(Y: np.ndarray, k: int) -> np.ndarray:
    # integer power by repeated squaring; much faster than the generic float pow
    if k == 0:
        return np.ones_like(Y)
    out = None
    base = Y
    while True:
        if k & 1:
            out = base.copy() if out is None else out * base
        k >>= 1
        if not k:
            return out
        base = base * base


class _Evaluator:
    """Batched objective and gradient; columns of V are points on the sphere."""

    def __init__(self, prob: DeviationProblem):
        self.prob = prob
        self.X = np.ascontiguousarray(prob.sample.data, dtype=float)
        self.n = self.X.shape[0]
        self.p = prob.p
        self.absolute = prob.absolute

    def _g(self, Y):
        return _ipow(np.abs(Y), self.p) if self.absolute else _ipow(Y, self.p)

    def _dg(self, Y):
        # g'(t) / p
        if self.absolute:
            return _ipow(np.abs(Y), self.p - 1) * np.sign(Y)
        return _ipow(Y, self.p - 1)

    def value(self, V: np.ndarray) -> np.ndarray:
        Y = self.X @ V
        emp = self._g(Y).sum(axis=0) / self.n
        return emp - moment_batch(self.prob.spec, V, self.p, self.absolute)

    def value_and_grad(self, V: np.ndarray):
        Y = self.X @ V
        emp = self._g(Y).sum(axis=0) / self.n
        f = emp - moment_batch(self.prob.spec, V, self.p, self.absolute)
        G = self.X.T @ self._dg(Y) / self.n
        G -= moment_gradient_batch(self.prob.spec, V, self.p, self.absolute)
        return f, self.p * G


def _unit(prob: DeviationProblem, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != prob.d:
        raise InvalidParameterError(f"v has dimension {v.shape[0]}, expected {prob.d}")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidParameterError("v must be a unit vector")
    return v


def deviation_objective(prob: DeviationProblem, v) -> float:
    """N^-1 sum_i g(<X_i,v>) - E g(<X,v>) (signed, before the absolute value)."""
    v = _unit(prob, v)
    return float(_Evaluator(prob).value(v[:, None])[0])


def deviation_gradient(prob: DeviationProblem, v) -> np.ndarray:
    """Euclidean gradient of the homogeneous extension of deviation_objective."""
    v = _unit(prob, v)
    return _Evaluator(prob).value_and_grad(v[:, None])[1][:, 0]


# ---------------------------------------------------------------- ascent

def _normalize(V):
    return V / np.linalg.norm(V, axis=0, keepdims=True)


def _ascend(ev: _Evaluator, V: np.ndarray, signs: np.ndarray, cfg: SolverConfig):
    """Projected gradient ascent of signs * f from every column of V.

    Each iteration moves along the tangential gradient, renormalizes, and backtracks
    until a nonmonotone Armijo condition holds (reference: best of the last
    NONMONOTONE_WINDOW values). Trial steps are Barzilai-Borwein estimates from the
    previous iterate (first iteration: cfg.initial_step).
    Returns (V, F, iterations, converged) with F = signs * f(V).
    """
    V = V.copy()
    B = V.shape[1]
    f, G = ev.value_and_grad(V)
    F = signs * f
    T = signs * G
    T -= V * np.sum(V * T, axis=0)
    step = np.full(B, cfg.initial_step)
    hist = np.tile(F, (NONMONOTONE_WINDOW, 1))
    iters = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    for _ in range(cfg.max_iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Vi, Ti = V[:, idx], T[:, idx]
        tn2 = np.sum(Ti * Ti, axis=0)
        t = step[idx].copy()
        newV = Vi.copy()
        newF = F[idx].copy()
        stuck = tn2 == 0.0
        pending = ~stuck
        while np.any(pending):
            k = np.flatnonzero(pending)
            C = _normalize(Vi[:, k] + t[k] * Ti[:, k])
            fc = signs[idx[k]] * ev.value(C)
            ref = hist[:, idx[k]].max(axis=0)
            ok = fc >= ref + cfg.sufficient_increase * t[k] * tn2[k]
            good = k[ok]
            newV[:, good] = C[:, ok]
            newF[good] = fc[ok]
            pending[good] = False
            bad = k[~ok]
            t[bad] *= cfg.shrink
            # no ascent possible at machine precision: stationary
            tiny = bad[t[bad] * np.sqrt(tn2[bad]) < 1e-16]
            stuck[tiny] = True
            pending[tiny] = False
        iters[idx] += 1
        moved = np.linalg.norm(newV - Vi, axis=0)
        done = stuck | (moved < cfg.convergence_tol)
        V[:, idx] = newV
        F[idx] = newF
        hist[iters[idx] % NONMONOTONE_WINDOW, idx] = newF
        live = idx[~done]
        if live.size:
            f_l, G_l = ev.value_and_grad(V[:, live])
            Vl = V[:, live]
            Tl = signs[live] * G_l
            Tl -= Vl * np.sum(Vl * Tl, axis=0)
            s = Vl - Vi[:, ~done]
            y = Tl - T[:, live]
            sy = np.sum(s * y, axis=0)
            ss = np.sum(s * s, axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                bb = np.where(sy < 0, ss / -sy, 2.0 * t[~done])
            step[live] = np.clip(bb, 1e-3 * t[~done], 1e3 * t[~done])
            F[live] = signs[live] * f_l
            T[:, live] = Tl
        converged[idx[done]] = True
        active[idx[done]] = False
    return V, F, iters, converged


def _starts(prob: DeviationProblem, n_starts: int, rng: np.random.Generator):
    d = prob.d
    X = prob.sample.data
    n_rand = n_starts // 3
    n_data = n_starts // 3
    n_eig = n_starts - n_rand - n_data
    cols, tags = [], []

    norms = np.linalg.norm(X, axis=1)
    order = np.argsort(-norms, kind="stable")
    rows = [X[i] / norms[i] for i in order if norms[i] > 0][:n_data]
    cols += rows
    tags += ["data_direction"] * len(rows)

    if d <= DENSE_MAX_D:
        C = X.T @ X / X.shape[0]
        A = C - np.diag(prob.spec.spectrum.as_array())
        wa, Ua = np.linalg.eigh(A)
        wc, Uc = np.linalg.eigh(C)
        ia = np.argsort(-np.abs(wa), kind="stable")
        ic = np.argsort(-wc, kind="stable")
        eig = []
        for a, c in zip(ia, ic):
            eig += [Ua[:, a], Uc[:, c]]
        eig = eig[:n_eig]
        cols += eig
        tags += ["sample_cov_eigvec"] * len(eig)

    n_fill = n_starts - len(cols)
    if n_fill > 0:
        R = rng.standard_normal((d, n_fill))
        cols += list(_normalize(R).T)
        tags += ["random"] * n_fill
    return np.array(cols).T, tags


def _canonical(v: np.ndarray) -> tuple[np.ndarray, bool]:
    nz = np.flatnonzero(v)
    if nz.size and v[nz[0]] < 0:
        return -v, True
    return v, False


def maximize_deviation(prob: DeviationProblem, cfg: SolverConfig | None = None,
                       seed: int = 0) -> MaximizerResult:
    """Multi-start search for sup over unit v of |deviation_objective(prob, v)|."""
    cfg = cfg or SolverConfig()
    ev = _Evaluator(prob)
    d = prob.d
    if d == 1:
        f = float(ev.value(np.ones((1, 1)))[0])
        return MaximizerResult(abs(f), np.ones(1), 1 if f >= 0 else -1, 0, 1,
                               "data_direction", True)

    rng = np.random.Generator(np.random.PCG64(int(seed)))
    V0, tags = _starts(prob, cfg.restarts, rng)
    R = V0.shape[1]
    V = np.hstack([V0, V0])
    signs = np.concatenate([np.ones(R), -np.ones(R)])
    V, F, iters, conv = _ascend(ev, V, signs, cfg)

    f_true = ev.value(V)
    absval = np.abs(f_true)
    cands = []
    for j in range(2 * R):
        v, flipped = _canonical(V[:, j])
        branch = 1 if signs[j] > 0 else -1
        if flipped and not prob.even:
            branch = -branch
        cands.append((-absval[j], 0 if branch > 0 else 1, tuple(v), j, branch))
    cands.sort()
    _, _, vt, j, branch = cands[0]
    argmax = np.array(vt)
    argmax /= np.linalg.norm(argmax)
    f_at = float(ev.value(argmax[:, None])[0])
    best = abs(f_at)
    per_restart = np.maximum(absval[:R], absval[R:])
    agree = float(np.mean(per_restart >= best - 1e-6 * max(1.0, best)))
    return MaximizerResult(
        value=best,
        argmax=argmax,
        sign_branch=1 if f_at >= 0 else -1,
        iterations_used=int(iters[j]),
        restarts_used=R,
        seed_provenance=tags[j % R],
        converged=bool(conv[j]),
        restarts_agree_frac=agree,
        converged_frac=float(np.mean(conv)),
    )


# ---------------------------------------------------------------- oracles

def exact_oracle_p2(sample: Sample, spec: DistributionSpec) -> float:
    """||N^-1 sum X_i X_i^T - Sigma|| via a dense symmetric eigensolver."""
    if sample.spec_digest != spec.digest():
        raise InvalidParameterError("sample was not drawn from this distribution spec")
    d = spec.d
    if d > DENSE_MAX_D:
        raise UnsupportedError(f"dense p=2 oracle limited to d <= {DENSE_MAX_D}")
    X = sample.data
    A = X.T @ X / X.shape[0] - np.diag(spec.spectrum.as_array())
    w = np.linalg.eigvalsh(A)
    return float(max(abs(w[0]), abs(w[-1])))


def _circle(theta):
    theta = np.asarray(theta, dtype=float)
    return np.vstack([np.cos(theta), np.sin(theta)])


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly uniform points on S^2, as a (3, n) array."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    return np.vstack([r * np.cos(phi), r * np.sin(phi), z])


def grid_oracle(prob: DeviationProblem, resolution: int, return_argmax: bool = False):
    """Certified sup of |objective| for d in {2, 3} by grid search plus local refinement."""
    d = prob.d
    if d not in (2, 3):
        raise UnsupportedError(f"grid oracle needs d in {{2, 3}}, got {d}")
    if resolution < 1:
        raise InvalidParameterError("resolution must be positive")
    ev = _Evaluator(prob)
    chunk = max(1, 2**22 // max(1, prob.sample.n))
    if d == 2:
        theta = math.pi * np.arange(resolution) / resolution
        vals = np.concatenate([np.abs(ev.value(_circle(theta[i:i + chunk])))
                               for i in range(0, resolution, chunk)])
        k = int(np.argmax(vals))
        h = math.pi / resolution

        def obj(t):
            return float(abs(ev.value(_circle([t]))[0]))

        t_ref, v_ref = golden_max(obj, theta[k] - h, theta[k] + h, 1e-10)
        if v_ref >= vals[k]:
            best, v = v_ref, _circle([t_ref])[:, 0]
        else:
            best, v = float(vals[k]), _circle([theta[k]])[:, 0]
    else:
        P = fibonacci_sphere(resolution)
        vals = np.concatenate([np.abs(ev.value(P[:, i:i + chunk]))
                               for i in range(0, resolution, chunk)])
        top = np.argsort(-vals, kind="stable")[:10]
        V0 = P[:, top]
        f0 = ev.value(V0)
        signs = np.where(f0 >= 0, 1.0, -1.0)
        V, F, _, _ = _ascend(ev, V0, signs, SolverConfig())
        j = int(np.argmax(F))
        best, v = float(F[j]), V[:, j]
        if vals[top[0]] > best:
            best, v = float(vals[top[0]]), V0[:, 0]
    if return_argmax:
        return best, _canonical(v)[0]
    return best


def grid_gap_bound(value: float, p: int, resolution: int) -> float:
    """Worst-case shortfall of a product angular grid (spacing pi/resolution) below the sup."""
    return p * (math.pi / (2.0 * resolution)) * value


def multilinear_grid_sup(sample: Sample, spec: DistributionSpec, p: int, resolution: int) -> float:
    """max over a product angular grid of |N^-1 sum_i prod_k <X_i,v_k> - E prod_k <X,v_k>|, d = 2."""
    if spec.d != 2:
        raise UnsupportedError("multilinear grid oracle needs d = 2")
    if p not in (2, 3):
        raise UnsupportedError("multilinear grid oracle needs p in {2, 3}")
    if not 1 <= resolution <= 400:
        raise UnsupportedError("resolution must lie in [1, 400]")
    if sample.spec_digest != spec.digest():
        raise InvalidParameterError("sample was not drawn from this distribution spec")
    U = _circle(math.pi * np.arange(resolution) / resolution)
    A = sample.data @ U
    n = sample.n
    if p == 2:
        T = A.T @ A / n - U.T @ np.diag(spec.spectrum.as_array()) @ U
        return float(np.abs(T).max())
    # odd population term vanishes for the symmetric families
    best = 0.0
    for a in range(resolution):
        T = (A[:, a:a + 1] * A).T @ A / n
        best = max(best, float(np.abs(T).max()))
    return best
