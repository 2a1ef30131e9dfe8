"""Seeded samplers and exact population moment functionals m_p(v) = E<X,v>^p.

Every family is centered, symmetric and calibrated so that Var<X,v> = <Sigma v, v>.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.special import comb, gammaln, hyp1f1

from tensorconc.covmodel import Spectrum
from tensorconc.errors import (
    InvalidParameterError,
    MomentDoesNotExistError,
    NotSubGaussianError,
    UnsupportedError,
)

FAMILIES = ("gaussian", "rademacher", "sphere", "student_t")
EXACT_ENUM_MAX_D = 20
UNIT_TOL = 1e-12
PSI2_GAUSS = math.sqrt(8.0 / 3.0)


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    spectrum: Spectrum
    dof: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        if self.family == "student_t":
            if self.dof is None or not self.dof > 2:
                raise InvalidParameterError("student_t needs dof > 2 (finite variance)")
        elif self.dof is not None:
            raise InvalidParameterError(f"dof is only meaningful for student_t, not {self.family}")

    @property
    def d(self) -> int:
        return self.spectrum.d

    @property
    def symmetric(self) -> bool:
        return True

    @property
    def sub_gaussian(self) -> bool:
        return self.family != "student_t"

    def to_json(self) -> dict:
        out = {"family": self.family, "spectrum": self.spectrum.to_json()}
        if self.dof is not None:
            out["dof"] = self.dof
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionSpec":
        unknown = set(obj) - {"family", "spectrum", "dof"}
        if unknown:
            raise InvalidParameterError(f"unknown keys in distribution spec: {sorted(unknown)}")
        return cls(obj["family"], Spectrum.from_json(obj["spectrum"]), obj.get("dof"))

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def check_moment(self, p: float) -> None:
        if self.family == "student_t" and not p < self.dof:
            raise MomentDoesNotExistError(
                f"E|T|^{p} does not exist for student_t with dof={self.dof} (need p < dof)")


@dataclass(frozen=True, eq=False)
class Sample:
    data: np.ndarray = field(repr=False)
    n: int
    spec_digest: str
    seed: int
    generator_id: str


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def generator_id(spec: DistributionSpec) -> str:
    return f"pcg64/{spec.family}/v1"


def sample(spec: DistributionSpec, n: int, seed: int) -> Sample:
    """Draw an n x d block. Bit-reproducible for a given (spec, n, seed) within a build."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    seed = _check_seed(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    d = spec.d
    scale = np.sqrt(spec.spectrum.as_array())
    if spec.family == "gaussian":
        z = rng.standard_normal((n, d))
    elif spec.family == "rademacher":
        z = rng.integers(0, 2, size=(n, d)).astype(float) * 2.0 - 1.0
    elif spec.family == "sphere":
        g = rng.standard_normal((n, d))
        z = math.sqrt(d) * g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        nu = spec.dof
        z = rng.standard_t(nu, size=(n, d)) * math.sqrt((nu - 2.0) / nu)
    return Sample(z * scale, n, spec.digest(), seed, generator_id(spec))


def _check_unit(spec: DistributionSpec, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != spec.d:
        raise InvalidParameterError(f"v has dimension {v.shape[0]}, expected {spec.d}")
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidParameterError(f"v must be a unit vector (norm {np.linalg.norm(v)!r})")
    return v


def directional_variance(spec: DistributionSpec, v) -> float:
    v = _check_unit(spec, v)
    return float(np.dot(spec.spectrum.as_array(), v * v))


# ---------------------------------------------------------------- 1-d moments

def gaussian_abs_moment(q: float) -> float:
    """E|Z|^q for standard normal Z, any real q > -1."""
    return math.exp(0.5 * q * math.log(2.0) + gammaln(0.5 * (q + 1.0)) - 0.5 * math.log(math.pi))


def odd_double_factorial(p: int) -> float:
    """(p-1)!! for even p, i.e. E Z^p."""
    out = 1.0
    for k in range(p - 1, 0, -2):
        out *= k
    return out


def sphere_coord_abs_moment(q: float, d: int) -> float:
    """E|theta_1|^q for theta uniform on the unit sphere of R^d."""
    if q % 2 == 0:
        k = int(q) // 2
        num = odd_double_factorial(2 * k)
        den = 1.0
        for j in range(1, k + 1):
            den *= d + 2 * j - 2
        return num / den
    return math.exp(gammaln(d / 2) + gammaln((q + 1) / 2) - 0.5 * math.log(math.pi)
                    - gammaln((d + q) / 2))


def student_abs_moment(q: float, nu: float) -> float:
    """E|T|^q for (non-standardized) Student t with nu dof, q < nu."""
    return math.exp(0.5 * q * math.log(nu) + gammaln((q + 1) / 2) + gammaln((nu - q) / 2)
                    - 0.5 * math.log(math.pi) - gammaln(nu / 2))


def coordinate_moments(spec: DistributionSpec, pmax: int) -> np.ndarray:
    """E Y^k, k = 0..pmax, for the standardized coordinate of an independent-coordinate family."""
    mu = np.zeros(pmax + 1)
    mu[0] = 1.0
    for k in range(2, pmax + 1, 2):
        if spec.family == "rademacher":
            mu[k] = 1.0
        elif spec.family == "student_t":
            nu = spec.dof
            mu[k] = ((nu - 2.0) / nu) ** (k / 2) * student_abs_moment(k, nu)
        elif spec.family == "gaussian":
            mu[k] = odd_double_factorial(k)
        else:
            raise UnsupportedError(f"{spec.family} coordinates are not independent")
    return mu


def _convolve_moments(ma: np.ndarray, mb: np.ndarray, binom: np.ndarray) -> np.ndarray:
    # moments of A + B for independent A, B; arrays shaped (pmax+1, batch)
    out = np.zeros_like(ma)
    for q in range(ma.shape[0]):
        for k in range(q + 1):
            out[q] += binom[q, k] * ma[k] * mb[q - k]
    return out


def _binomials(pmax: int) -> np.ndarray:
    return np.array([[comb(q, k, exact=True) if k <= q else 0 for k in range(pmax + 1)]
                     for q in range(pmax + 1)], dtype=float)


def _term_moments(a: np.ndarray, mu: np.ndarray) -> np.ndarray:
    # moments of a * Y for each batch entry: a**k * mu[k]
    k = np.arange(mu.shape[0])[:, None]
    return a[None, :] ** k * mu[:, None]


def _independent_sum_moments(A: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Moments 0..pmax of sum_j A[j] Y_j with i.i.d. standardized Y_j. A is (d, batch)."""
    pmax = mu.shape[0] - 1
    binom = _binomials(pmax)
    M = np.zeros((pmax + 1, A.shape[1]))
    M[0] = 1.0
    for j in range(A.shape[0]):
        M = _convolve_moments(M, _term_moments(A[j], mu), binom)
    return M


def _independent_sum_gradient(A: np.ndarray, mu: np.ndarray, p: int) -> np.ndarray:
    """E[S^(p-1) Y_j] for every coordinate j; A is (d, batch), returns (d, batch)."""
    binom = _binomials(p)
    d, B = A.shape
    one = np.zeros((p + 1, B))
    one[0] = 1.0
    prefix = [one]
    for j in range(d):
        prefix.append(_convolve_moments(prefix[-1], _term_moments(A[j], mu), binom))
    suffix = [one]
    for j in range(d - 1, -1, -1):
        suffix.append(_convolve_moments(suffix[-1], _term_moments(A[j], mu), binom))
    suffix = suffix[::-1]  # suffix[j] = moments of sum over k >= j
    out = np.zeros((d, B))
    for j in range(d):
        loo = _convolve_moments(prefix[j], suffix[j + 1], binom)
        for i in range(p):
            out[j] += binom[p - 1, i] * A[j] ** i * mu[i + 1] * loo[p - 1 - i]
    return out


def _sign_patterns(d: int) -> np.ndarray:
    return np.array(list(product((-1.0, 1.0), repeat=d)))


def _rademacher_enumerated(spec: DistributionSpec, V: np.ndarray, p: int, gradient: bool):
    # E|<X,v>|^p and E|<X,v>|^(p-1) sign(<X,v>) X by averaging over all 2^d sign patterns
    E = _sign_patterns(spec.d) * np.sqrt(spec.spectrum.as_array())
    S = E @ V
    if not gradient:
        return np.mean(np.abs(S) ** p, axis=0)
    W = np.abs(S) ** (p - 1) * np.sign(S)
    return E.T @ W / E.shape[0]


def _check_exact_family(spec: DistributionSpec, p: int) -> None:
    spec.check_moment(p)
    if spec.family in ("rademacher", "student_t") and spec.d > EXACT_ENUM_MAX_D:
        raise UnsupportedError(
            f"exact {spec.family} moments are limited to d <= {EXACT_ENUM_MAX_D} (got d={spec.d}); "
            "use a Monte Carlo estimate instead")


def moment_batch(spec: DistributionSpec, V: np.ndarray, p: int, absolute: bool = False) -> np.ndarray:
    """m(v) for each column of V: E<X,v>^p, or E|<X,v>|^p when ``absolute``.

    Columns need not be unit vectors; every formula is the homogeneous extension.
    """
    V = np.asarray(V, dtype=float)
    _check_exact_family(spec, p)
    B = V.shape[1]
    if p % 2 == 1 and not absolute:
        return np.zeros(B)
    lam = spec.spectrum.as_array()
    quad = lam @ (V * V)
    fam = spec.family
    if fam == "gaussian":
        c = odd_double_factorial(p) if p % 2 == 0 else gaussian_abs_moment(p)
        return c * quad ** (p / 2)
    if fam == "sphere":
        return spec.d ** (p / 2) * sphere_coord_abs_moment(p, spec.d) * quad ** (p / 2)
    if p % 2 == 1:
        if fam == "rademacher":
            return _rademacher_enumerated(spec, V, p, gradient=False)
        raise UnsupportedError("absolute odd moments of student_t have no exact form here")
    A = np.sqrt(lam)[:, None] * V
    return _independent_sum_moments(A, coordinate_moments(spec, p))[p]


def moment_gradient_batch(spec: DistributionSpec, V: np.ndarray, p: int,
                          absolute: bool = False) -> np.ndarray:
    """M(v) = E g'(<X,v>) X / p for g(t) = t^p (or |t|^p); shape (d, batch).

    Equals (1/p) times the Euclidean gradient of the homogeneous extension of m.
    """
    V = np.asarray(V, dtype=float)
    _check_exact_family(spec, p)
    if p % 2 == 1 and not absolute:
        return np.zeros_like(V)
    lam = spec.spectrum.as_array()
    quad = lam @ (V * V)
    fam = spec.family
    if fam in ("gaussian", "sphere"):
        m = moment_batch(spec, V, p, absolute)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(quad > 0, m / quad, 0.0)
        return lam[:, None] * V * w[None, :]
    if p % 2 == 1:
        if fam == "rademacher":
            return _rademacher_enumerated(spec, V, p, gradient=True)
        raise UnsupportedError("absolute odd moments of student_t have no exact form here")
    sq = np.sqrt(lam)
    A = sq[:, None] * V
    return sq[:, None] * _independent_sum_gradient(A, coordinate_moments(spec, p), p)


def _check_order(p, lo: int) -> int:
    if int(p) != p or p < lo:
        raise InvalidParameterError(f"p must be an integer >= {lo}, got {p!r}")
    return int(p)


def population_moment(spec: DistributionSpec, v, p: int, absolute: bool = False) -> float:
    v = _check_unit(spec, v)
    p = _check_order(p, 1)
    return float(moment_batch(spec, v[:, None], p, absolute)[0])


def population_moment_gradient(spec: DistributionSpec, v, p: int, absolute: bool = False) -> np.ndarray:
    v = _check_unit(spec, v)
    p = _check_order(p, 2)
    return moment_gradient_batch(spec, v[:, None], p, absolute)[:, 0]


# ---------------------------------------------------------------- psi_2

def psi2_norm(spec: DistributionSpec, v) -> float:
    """||<X,v>||_psi2 for an arbitrary (not necessarily unit) v."""
    from tensorconc.chaining import orlicz_norm

    v = np.asarray(v, dtype=float).reshape(-1)
    if not spec.sub_gaussian:
        raise NotSubGaussianError(f"{spec.family} marginals are not sub-Gaussian")
    lam = spec.spectrum.as_array()
    sigma2 = float(np.dot(lam, v * v))
    if sigma2 == 0.0:
        return 0.0
    if spec.family == "gaussian":
        return PSI2_GAUSS * math.sqrt(sigma2)
    if spec.family == "sphere":
        # <X,v> = R theta_1 with theta_1^2 ~ Beta(1/2, (d-1)/2): E exp(t theta_1^2) = 1F1(1/2; d/2; t)
        r2 = spec.d * sigma2
        first = math.sqrt(r2) * sphere_coord_abs_moment(1, spec.d)
        return orlicz_norm(lambda c: float(hyp1f1(0.5, spec.d / 2, r2 / c**2)), 2.0,
                           first_moment=first)
    if spec.d > EXACT_ENUM_MAX_D:
        raise UnsupportedError(f"exact rademacher psi2 norm limited to d <= {EXACT_ENUM_MAX_D}")
    # sign flip of the whole pattern leaves S^2 unchanged, so fix the first sign
    E = _sign_patterns(spec.d - 1) if spec.d > 1 else np.zeros((1, 0))
    E = np.hstack([np.ones((E.shape[0], 1)), E])
    s2 = (E @ (np.sqrt(lam) * v)) ** 2

    def oracle(c):
        with np.errstate(over="ignore"):
            return float(np.mean(np.exp(s2 / c**2)))

    return orlicz_norm(oracle, 2.0, first_moment=float(np.mean(np.sqrt(s2))))


def psi2_directional(spec: DistributionSpec, v) -> float:
    v = _check_unit(spec, v)
    return psi2_norm(spec, v)
