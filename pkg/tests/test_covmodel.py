import json
import math

import pytest
from hypothesis import given, strategies as st

from tensorconc.covmodel import Spectrum, effective_rank, make_spectrum, operator_norm, trace
from tensorconc.errors import InvalidParameterError

eigs = st.lists(st.floats(min_value=1e-6, max_value=1e6), min_size=1, max_size=40)


def test_identity():
    assert make_spectrum("identity", 4).eigenvalues == (1.0, 1.0, 1.0, 1.0)


def test_geometric():
    assert make_spectrum("geometric", 3, ratio=0.5).eigenvalues == (1.0, 0.5, 0.25)


def test_polynomial():
    s = make_spectrum("polynomial", 3, exponent=2.0)
    assert s.eigenvalues == pytest.approx((1.0, 0.25, 1 / 9))


def test_custom_is_sorted_copy():
    vals = [2, 5, 1]
    assert make_spectrum("custom", 3, values=vals).eigenvalues == (5.0, 2.0, 1.0)
    assert vals == [2, 5, 1]


@pytest.mark.parametrize("kwargs", [
    dict(kind="custom", d=2, values=[1.0, 0.0]),
    dict(kind="custom", d=2, values=[1.0, -3.0]),
    dict(kind="custom", d=1, values=[]),
    dict(kind="geometric", d=3, ratio=1.0),
    dict(kind="geometric", d=3, ratio=0.0),
    dict(kind="polynomial", d=3, exponent=0.0),
    dict(kind="identity", d=0),
    dict(kind="nope", d=2),
])
def test_invalid_parameters(kwargs):
    with pytest.raises(InvalidParameterError):
        make_spectrum(**kwargs)


def test_spectrum_rejects_unsorted_and_nonfinite():
    with pytest.raises(InvalidParameterError):
        Spectrum((1.0, 2.0))
    with pytest.raises(InvalidParameterError):
        Spectrum((math.inf,))
    with pytest.raises(InvalidParameterError):
        Spectrum(())


@pytest.mark.parametrize("vals, r", [([1, 1, 1, 1], 4.0), ([1, 0.5, 0.25], 1.75), ([5], 1.0)])
def test_effective_rank_examples(vals, r):
    assert effective_rank(Spectrum(tuple(vals))) == r


def test_norm_and_trace_examples():
    s = Spectrum((3.0, 1.0))
    assert operator_norm(s) == 3.0 and trace(s) == 4.0
    one = Spectrum((1.0,))
    assert operator_norm(one) == trace(one) == 1.0


def test_json_roundtrip():
    s = make_spectrum("geometric", 5, ratio=0.3)
    text = json.dumps(s.to_json())
    assert Spectrum.from_json(json.loads(text)) == s


@given(eigs)
def test_rank_bounds(vals):
    s = make_spectrum("custom", len(vals), values=vals)
    r = effective_rank(s)
    assert 1.0 <= r <= s.d * (1 + 1e-12)
    assert operator_norm(s) <= trace(s) <= s.d * operator_norm(s) * (1 + 1e-12)


@given(eigs, st.floats(min_value=1e-3, max_value=1e3))
def test_rank_scale_invariant(vals, t):
    s = make_spectrum("custom", len(vals), values=vals)
    assert effective_rank(s.scaled(t)) == pytest.approx(effective_rank(s), rel=1e-12)
