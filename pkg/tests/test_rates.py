import math

import mpmath as mp
import pytest
from hypothesis import given, strategies as st

from tensorconc.errors import InvalidParameterError
from tensorconc.rates import (
    K_GAUSS,
    ProcessRateInputs,
    TensorRateInputs,
    competing_even_rate,
    competing_guedon_rate,
    guedon_max_norm_bound,
    kl_p2_rate,
    prop31_lower_rate,
    remark25_rate,
    remark25_third_term,
    remark41_lm_tail_rate,
    thm1_expectation_rate,
    thm1_tail_increment,
    thm1_tail_rate,
    thm2_alt_tail_rate,
    thm2_expectation_rate,
    thm2_tail_rate,
)

mp.mp.dps = 40

pos = st.floats(1e-3, 1e3)
ranks = st.floats(1.0, 1e3)
ns = st.integers(1, 10**6)
ps = st.floats(2.0, 8.0)
us = st.floats(1.0, 100.0)


def T(op=1.0, r=1.0, n=1, p=2.0, u=None, k=1.0):
    return TensorRateInputs(op, r, n, p, u, k)


def P(g=1.0, d=1.0, n=1, p=2.0, u=None, m=None):
    return ProcessRateInputs(g, d, n, p, u, m)


# ---------------------------------------------------------------- examples

def test_thm1_examples():
    assert thm1_expectation_rate(T()) == 2.0
    assert thm1_expectation_rate(T(1, 4, 100, 2)) == pytest.approx(0.24, rel=1e-14)
    assert thm1_expectation_rate(T(2, 4, 100, 4)) == pytest.approx(1.44, rel=1e-14)
    assert thm1_tail_rate(T(u=1.0)) == 4.0
    assert TensorRateInputs(1, 1, 1, 2).k_subg == K_GAUSS == math.sqrt(8 / 3)


def test_prop31_examples():
    assert prop31_lower_rate(T(1, 1, 4, 2)) == 0.75
    x = T(3.0, 5.0, 20, 3.0, k=2.0)
    assert prop31_lower_rate(x) == thm1_expectation_rate(T(3.0, 5.0, 20, 3.0, k=1.0))


def test_thm2_examples():
    assert thm2_expectation_rate(P()) == 2.0
    assert thm2_expectation_rate(P(g=0.0)) == 0.0
    assert thm2_expectation_rate(P(2.0, 1.0, 4, 3.0)) == 3.0
    assert thm2_alt_tail_rate(P(0.0, 1.0, 1, 2.0, u=1.0)) == 2.0
    with pytest.raises(InvalidParameterError):
        thm2_expectation_rate(P(p=1.5))


def test_remark25_examples():
    assert remark25_rate(P(1.0, 1.0, 1, 1.5)) == pytest.approx(3.0, rel=1e-14)
    x = P(1.0, 1.0, 16, 2.0)
    assert remark25_third_term(x) == 0.125
    assert thm2_expectation_rate(x) == 0.3125
    assert remark25_rate(P(0.0, 1.0, 16, 1.5)) == 0.0


def test_remark41_examples():
    assert remark41_lm_tail_rate(P(1.0, 1.0, 1, 2.0, u=1.0, m=2.0)) == 3.0
    d = 0.7
    a = remark41_lm_tail_rate(P(1.0, d, 1, 2.0, u=1.0, m=3.0))
    b = remark41_lm_tail_rate(P(1.0, d, 2**3, 2.0, u=1.0, m=3.0))
    assert b - a == pytest.approx(d, rel=1e-14)
    slope = remark41_lm_tail_rate(P(1.0, d, 10, 2.0, u=2e6, m=3.0)) - remark41_lm_tail_rate(P(1.0, d, 10, 2.0, u=1e6, m=3.0))
    assert slope == pytest.approx(1e6 * d, rel=1e-12)
    with pytest.raises(InvalidParameterError):
        remark41_lm_tail_rate(P(1.0, 1.0, 1, 2.0, u=1.0, m=1.5))
    with pytest.raises(InvalidParameterError):
        remark41_lm_tail_rate(P(1.0, 1.0, 1, 2.0, u=1.0))


def test_competitor_examples():
    n = 10
    op, p = 2.0, 2.0
    forced = op ** (p / 2) * n / math.log(n)
    assert competing_guedon_rate(op, p, n, forced) == pytest.approx(2 * op, rel=1e-14)
    assert competing_guedon_rate(op, p, n, 0.0) == 0.0
    with pytest.raises(InvalidParameterError):
        competing_guedon_rate(op, p, 1, 1.0)
    assert competing_even_rate(3.0, 1.0, math.e ** 2, 2.0, 1) == pytest.approx(2 * 3.0 / math.e, rel=1e-14)
    assert competing_even_rate(1.0, 2.0, 50, 3.0, 10) < competing_even_rate(1.0, 2.0, 50, 3.0, 11)
    assert guedon_max_norm_bound(2.0, 3.0, 1, 4.0) == 36.0


def test_kl_examples():
    assert kl_p2_rate(3.0, 5.0, 5) == 6.0
    assert kl_p2_rate(2.0, 1.0, 100) == pytest.approx(0.22, rel=1e-14)


def test_input_validation():
    for bad in (dict(op_norm=0.0), dict(eff_rank=0.5), dict(n=0), dict(p=1.9), dict(u=0.5), dict(k_subg=0.0)):
        kw = dict(op_norm=1.0, eff_rank=1.0, n=1, p=2.0)
        kw.update(bad)
        with pytest.raises(InvalidParameterError):
            TensorRateInputs(**kw)
    for bad in (dict(gamma=-1.0), dict(d_psi2=0.0), dict(p=1.0), dict(m=0.5)):
        kw = dict(gamma=1.0, d_psi2=1.0, n=1, p=2.0)
        kw.update(bad)
        with pytest.raises(InvalidParameterError):
            ProcessRateInputs(**kw)
    with pytest.raises(InvalidParameterError):
        thm1_tail_rate(T())


# ---------------------------------------------------------------- properties

@given(pos, ranks, ns, ps, st.floats(0.5, 3.0))
def test_thm1_matches_high_precision(op, r, n, p, k):
    x = T(op, r, n, p, k=k)
    ref = mp.mpf(k) ** p * mp.mpf(op) ** (mp.mpf(p) / 2) * (mp.sqrt(mp.mpf(r) / n) + mp.mpf(r) ** (mp.mpf(p) / 2) / n)
    assert thm1_expectation_rate(x) == pytest.approx(float(ref), rel=1e-12)


@given(pos, pos, ns, ps, us)
def test_thm2_matches_high_precision(g, d, n, p, u):
    x = P(g, d, n, p, u)
    G, D, N, Pm, U = map(mp.mpf, (g, d, n, p, u))
    ref = G * D ** (Pm - 1) / mp.sqrt(N) + G ** Pm / N
    ref_tail = U * G * D ** (Pm - 1) / mp.sqrt(N) + (U * G) ** Pm / N
    ref_alt = ref + D ** Pm * (mp.sqrt(U / N) + U ** (Pm / 2) / N)
    assert thm2_expectation_rate(x) == pytest.approx(float(ref), rel=1e-12)
    assert thm2_tail_rate(x) == pytest.approx(float(ref_tail), rel=1e-12)
    assert thm2_alt_tail_rate(x) == pytest.approx(float(ref_alt), rel=1e-12)


@given(pos, ranks, ns, ps)
def test_tail_at_u_equal_r_doubles(op, r, n, p):
    x = T(op, r, n, p, u=r, k=1.3)
    assert thm1_tail_rate(x) == pytest.approx(2 * thm1_expectation_rate(x), rel=1e-12)
    assert thm1_tail_increment(x) == pytest.approx(thm1_expectation_rate(x), rel=1e-12)


@given(pos, ranks, ns, ps, us, us)
def test_tails_monotone_in_u(op, r, n, p, u1, u2):
    lo, hi = sorted((u1, u2))
    assert thm1_tail_rate(T(op, r, n, p, lo)) <= thm1_tail_rate(T(op, r, n, p, hi))
    assert thm2_tail_rate(P(op, r, n, p, lo)) <= thm2_tail_rate(P(op, r, n, p, hi))
    assert thm2_alt_tail_rate(P(op, r, n, p, lo)) <= thm2_alt_tail_rate(P(op, r, n, p, hi))


@given(pos, ranks, ns, ps, st.floats(0.01, 100.0))
def test_thm1_homogeneity(op, r, n, p, t):
    a = prop31_lower_rate(T(op, r, n, p))
    b = prop31_lower_rate(T(t * op, r, n, p))
    assert b == pytest.approx(t ** (p / 2) * a, rel=1e-12)


@given(pos, pos, ns, ps, st.floats(0.01, 100.0))
def test_thm2_homogeneity(g, d, n, p, t):
    assert thm2_expectation_rate(P(t * g, t * d, n, p)) == pytest.approx(
        t ** p * thm2_expectation_rate(P(g, d, n, p)), rel=1e-12)


@given(pos, pos, ns, ps)
def test_remark25_third_term_dominated(g, d, n, p):
    # third/first = (g/d)^(1/2) N^(-1/4) and third/second = (d/g)^(p-3/2) N^(1/4);
    # for p >= 2 at least one of them is <= 1
    x = P(g, d, n, p)
    assert remark25_third_term(x) <= thm2_expectation_rate(x) * (1 + 1e-12)


@given(pos, ranks, ns)
def test_kl_equals_thm1_at_p2(op, r, n):
    assert kl_p2_rate(op, r, n) == pytest.approx(thm1_expectation_rate(T(op, r, n, 2.0)), rel=1e-14)
