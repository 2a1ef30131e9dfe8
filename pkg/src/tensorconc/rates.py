"""Closed-form rate calculators. Unspecified absolute constants are set to 1; log is natural."""

from __future__ import annotations

import math
from dataclasses import dataclass

from tensorconc.errors import InvalidParameterError

K_GAUSS = math.sqrt(8.0 / 3.0)


@dataclass(frozen=True)
class TensorRateInputs:
    op_norm: float
    eff_rank: float
    n: int
    p: float
    u: float | None = None
    k_subg: float = K_GAUSS

    def __post_init__(self):
        if not self.op_norm > 0:
            raise InvalidParameterError("op_norm must be positive")
        if not self.eff_rank >= 1:
            raise InvalidParameterError("eff_rank must be >= 1")
        if not self.n >= 1:
            raise InvalidParameterError("n must be >= 1")
        if not self.p >= 2:
            raise InvalidParameterError("p must be >= 2")
        if self.u is not None and not self.u >= 1:
            raise InvalidParameterError("u must be >= 1")
        if not self.k_subg > 0:
            raise InvalidParameterError("k_subg must be positive")


@dataclass(frozen=True)
class ProcessRateInputs:
    gamma: float
    d_psi2: float
    n: int
    p: float
    u: float | None = None
    m: float | None = None

    def __post_init__(self):
        if not self.gamma >= 0:
            raise InvalidParameterError("gamma must be nonnegative")
        if not self.d_psi2 > 0:
            raise InvalidParameterError("d_psi2 must be positive")
        if not self.n >= 1:
            raise InvalidParameterError("n must be >= 1")
        if not self.p >= 1.5:
            raise InvalidParameterError("p must be >= 3/2")
        if self.u is not None and not self.u >= 1:
            raise InvalidParameterError("u must be >= 1")
        if self.m is not None and not self.m >= 1:
            raise InvalidParameterError("m must be >= 1")


def _need(value, name):
    if value is None:
        raise InvalidParameterError(f"{name} is required for this rate")
    return value


def _tensor_paren(r, n, p):
    return math.sqrt(r / n) + r ** (p / 2) / n


def thm1_expectation_rate(x: TensorRateInputs) -> float:
    """K^p ||Sigma||^(p/2) (sqrt(r/N) + r^(p/2)/N)"""
    return x.k_subg ** x.p * x.op_norm ** (x.p / 2) * _tensor_paren(x.eff_rank, x.n, x.p)


def thm1_tail_rate(x: TensorRateInputs) -> float:
    u = _need(x.u, "u")
    paren = _tensor_paren(x.eff_rank, x.n, x.p) + _tensor_paren(u, x.n, x.p)
    return x.k_subg ** x.p * x.op_norm ** (x.p / 2) * paren


def thm1_tail_increment(x: TensorRateInputs) -> float:
    """The u-dependent part of thm1_tail_rate: K^p ||Sigma||^(p/2) (sqrt(u/N) + u^(p/2)/N)."""
    u = _need(x.u, "u")
    return x.k_subg ** x.p * x.op_norm ** (x.p / 2) * _tensor_paren(u, x.n, x.p)


def prop31_lower_rate(x: TensorRateInputs) -> float:
    """Gaussian lower rate; same shape as the upper rate with K = 1."""
    return x.op_norm ** (x.p / 2) * _tensor_paren(x.eff_rank, x.n, x.p)


def _need_p2(x):
    if x.p < 2:
        raise InvalidParameterError("this rate needs p >= 2")


def thm2_expectation_rate(x: ProcessRateInputs) -> float:
    _need_p2(x)
    return x.gamma * x.d_psi2 ** (x.p - 1) / math.sqrt(x.n) + x.gamma ** x.p / x.n


def thm2_tail_rate(x: ProcessRateInputs) -> float:
    _need_p2(x)
    u = _need(x.u, "u")
    return u * x.gamma * x.d_psi2 ** (x.p - 1) / math.sqrt(x.n) + (u * x.gamma) ** x.p / x.n


def thm2_alt_tail_rate(x: ProcessRateInputs) -> float:
    u = _need(x.u, "u")
    tail = x.d_psi2 ** x.p * (math.sqrt(u / x.n) + u ** (x.p / 2) / x.n)
    return thm2_expectation_rate(x) + tail


def remark25_third_term(x: ProcessRateInputs) -> float:
    return x.gamma ** 1.5 * x.d_psi2 ** (x.p - 1.5) / x.n ** 0.75


def remark25_rate(x: ProcessRateInputs) -> float:
    """Expectation rate plus the third term; valid from p = 3/2."""
    head = x.gamma * x.d_psi2 ** (x.p - 1) / math.sqrt(x.n) + x.gamma ** x.p / x.n
    return head + remark25_third_term(x)


def remark41_lm_tail_rate(x: ProcessRateInputs) -> float:
    """gamma + N^(1/m) d_psi2 + d_psi2 u"""
    m = _need(x.m, "m")
    u = _need(x.u, "u")
    if m < 2:
        raise InvalidParameterError("the l_m tail rate needs m >= 2")
    return x.gamma + x.n ** (1.0 / m) * x.d_psi2 + x.d_psi2 * u


def competing_guedon_rate(op_norm: float, p: float, n: int, max_norm_moment: float) -> float:
    """||Sigma||^(p/2) (sqrt(eps) + eps), eps = (log N / N) E max_i ||X_i||^p / ||Sigma||^(p/2)."""
    if n < 2:
        raise InvalidParameterError("competing_guedon_rate needs n >= 2")
    if max_norm_moment < 0 or op_norm <= 0:
        raise InvalidParameterError("need op_norm > 0 and max_norm_moment >= 0")
    scale = op_norm ** (p / 2)
    eps = math.log(n) / n * max_norm_moment / scale
    return scale * (math.sqrt(eps) + eps)


def guedon_max_norm_bound(op_norm: float, eff_rank: float, n: int, p: float) -> float:
    """(||Sigma|| (r + log N))^(p/2), the sub-Gaussian bound on E max_i ||X_i||^p (constant 1)."""
    return (op_norm * (eff_rank + math.log(n))) ** (p / 2)


def competing_even_rate(op_norm: float, eff_rank: float, n: int, p: float, dim: int) -> float:
    if n < 2 or dim < 1:
        raise InvalidParameterError("competing_even_rate needs n >= 2 and dim >= 1")
    return op_norm ** (p / 2) * math.sqrt(math.log(n) ** p * (eff_rank + math.log(dim)) ** (p + 1) / n)


def kl_p2_rate(op_norm: float, eff_rank: float, n: int) -> float:
    return op_norm * (math.sqrt(eff_rank / n) + eff_rank / n)
