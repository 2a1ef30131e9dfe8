import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tensorconc.covmodel import Spectrum, make_spectrum
from tensorconc.errors import InvalidParameterError, MomentDoesNotExistError, UnsupportedError
from tensorconc.sampling import DistributionSpec, Sample, population_moment, sample
from tensorconc.tensornorm import (
    DeviationProblem,
    MaximizerResult,
    SolverConfig,
    deviation_gradient,
    deviation_objective,
    exact_oracle_p2,
    grid_gap_bound,
    grid_oracle,
    maximize_deviation,
    multilinear_grid_sup,
)

from conftest import random_unit


def gauss(vals):
    return DistributionSpec("gaussian", Spectrum(tuple(vals)))


def fixed_sample(spec, data):
    data = np.asarray(data, dtype=float)
    return Sample(data, data.shape[0], spec.digest(), 0, "fixed")


def problem(seed, d=3, n=20, p=3, variant="signed", family="gaussian"):
    lam = np.linspace(2.0, 0.5, d)
    s = DistributionSpec(family, Spectrum(tuple(lam)), 9.0 if family == "student_t" else None)
    return DeviationProblem(sample(s, n, seed), s, p, variant)


def kahan_objective(prob, v):
    # compensated summation in the opposite order, independent of the numpy path
    total, comp = 0.0, 0.0
    for x in reversed(prob.sample.data):
        y = float(sum(xi * vi for xi, vi in zip(x, v)))
        term = abs(y) ** prob.p if prob.absolute else y ** prob.p
        t = total + (term - comp)
        comp = (t - total) - (term - comp)
        total = t
    return total / prob.sample.n - population_moment(prob.spec, v, prob.p, prob.absolute)


# ---------------------------------------------------------------- problem validation

def test_problem_validation():
    s = gauss([1.0, 1.0])
    smp = sample(s, 5, 1)
    with pytest.raises(InvalidParameterError):
        DeviationProblem(smp, gauss([2.0, 1.0]), 2)
    with pytest.raises(InvalidParameterError):
        DeviationProblem(smp, s, 1)
    with pytest.raises(InvalidParameterError):
        DeviationProblem(smp, s, 2.5)
    with pytest.raises(InvalidParameterError):
        DeviationProblem(smp, s, 2, "both")
    t = DistributionSpec("student_t", Spectrum((1.0,)), 4.0)
    with pytest.raises(MomentDoesNotExistError):
        DeviationProblem(sample(t, 5, 1), t, 4)


# ---------------------------------------------------------------- objective and gradient

def test_objective_one_dimensional():
    s = gauss([1.0])
    prob = DeviationProblem(fixed_sample(s, [[2.0], [0.0]]), s, 2)
    assert deviation_objective(prob, [1.0]) == 1.0


def test_objective_orthogonal_data():
    s = gauss([2.0, 1.0])
    prob = DeviationProblem(fixed_sample(s, [[3.0, 0.0], [-1.0, 0.0]]), s, 4)
    assert deviation_objective(prob, [0.0, 1.0]) == -3.0


@pytest.mark.parametrize("p, variant", [(2, "signed"), (3, "signed"), (3, "absolute"), (4, "signed")])
def test_objective_matches_kahan(p, variant, rng):
    prob = problem(3, d=2, n=50, p=p, variant=variant)
    v = random_unit(rng, 2)
    assert deviation_objective(prob, v) == pytest.approx(kahan_objective(prob, v), rel=1e-12, abs=1e-12)


def test_objective_rejects_non_unit():
    prob = problem(1)
    with pytest.raises(InvalidParameterError):
        deviation_objective(prob, [1.0, 1.0, 0.0])
    with pytest.raises(InvalidParameterError):
        deviation_objective(prob, [1.0, 0.0])


def test_gradient_p2_closed_form(rng):
    prob = problem(4, d=4, n=30, p=2)
    X = prob.sample.data
    A = X.T @ X / X.shape[0] - np.diag(prob.spec.spectrum.as_array())
    v = random_unit(rng, 4)
    assert np.allclose(deviation_gradient(prob, v), 2 * A @ v, rtol=1e-12, atol=1e-12)


def fd(prob, v, h=1e-6):
    # central differences of the homogeneous extension
    from tensorconc.tensornorm import _Evaluator
    ev = _Evaluator(prob)
    g = np.zeros_like(v)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        g[j] = (ev.value((v + e)[:, None])[0] - ev.value((v - e)[:, None])[0]) / (2 * h)
    return g


@pytest.mark.parametrize("case", range(20))
def test_gradient_matches_finite_differences(case):
    r = np.random.default_rng(case)
    p = [2, 3, 4, 5][case % 4]
    variant = "absolute" if case % 3 == 0 else "signed"
    family = ["gaussian", "rademacher", "sphere"][case % 3]
    prob = problem(case, d=4, n=25, p=p, variant=variant, family=family)
    v = random_unit(r, 4)
    g = deviation_gradient(prob, v)
    scale = max(1.0, float(np.max(np.abs(g))))
    assert np.allclose(g, fd(prob, v), rtol=1e-6, atol=1e-6 * scale)


def test_gradient_zero_data():
    s = gauss([2.0, 1.0])
    prob = DeviationProblem(fixed_sample(s, np.zeros((3, 2))), s, 4)
    e1 = np.array([1.0, 0.0])
    g = deviation_gradient(prob, e1)
    # -p (p-1)!! lambda_1^(p/2) along e1
    assert np.allclose(g, [-4 * 3 * 4.0, 0.0], rtol=1e-12)
    assert np.allclose(g, fd(prob, e1), rtol=1e-6)


# ---------------------------------------------------------------- solver

def check_result(prob, res: MaximizerResult):
    assert res.value >= 0
    assert abs(np.linalg.norm(res.argmax) - 1) < 1e-10
    assert abs(res.value - abs(deviation_objective(prob, res.argmax / np.linalg.norm(res.argmax)))) < 1e-12
    nz = np.flatnonzero(res.argmax)
    assert res.argmax[nz[0]] > 0
    assert res.sign_branch in (1, -1)
    assert res.seed_provenance in ("random", "data_direction", "sample_cov_eigvec")


def test_one_dimensional_exact():
    s = gauss([1.0])
    prob = DeviationProblem(fixed_sample(s, [[0.5], [1.0]]), s, 4)
    res = maximize_deviation(prob)
    assert res.value == abs((0.5 ** 4 + 1.0) / 2 - 3.0)
    assert res.argmax.tolist() == [1.0]


@pytest.mark.parametrize("case", range(12))
def test_p2_matches_eigensolver(case):
    r = np.random.default_rng(100 + case)
    d = [2, 8, 32, 64][case % 4]
    n = [8, 64, 256][case % 3]
    s = DistributionSpec("gaussian", make_spectrum("custom", d, values=r.uniform(0.2, 3.0, d)))
    prob = DeviationProblem(sample(s, n, case), s, 2)
    res = maximize_deviation(prob, seed=case)
    exact = exact_oracle_p2(prob.sample, s)
    assert abs(res.value - exact) <= 1e-8 * max(1.0, exact)
    check_result(prob, res)


def test_d2_p3_matches_grid():
    s = gauss([1.0, 0.5])
    prob = DeviationProblem(sample(s, 2, 8), s, 3)
    res = maximize_deviation(prob, seed=1)
    assert abs(res.value - grid_oracle(prob, 100_000)) <= 1e-6


@pytest.mark.parametrize("case", range(8))
def test_solver_dominates_grid_low_dim(case):
    d = 2 + case % 2
    p = 3 + (case // 2) % 2
    prob = problem(case, d=d, n=15, p=p, variant=["signed", "absolute"][case // 4])
    res = maximize_deviation(prob, seed=case)
    assert res.value >= grid_oracle(prob, 20_000 if d == 3 else 10_000) - 1e-6
    check_result(prob, res)


@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4]), st.sampled_from(["signed", "absolute"]))
def test_solver_beats_probe_points(seed, p, variant):
    prob = problem(seed, d=5, n=12, p=p, variant=variant)
    res = maximize_deviation(prob, SolverConfig(restarts=12), seed=seed)
    probes = np.random.default_rng(seed).standard_normal((5, 10))
    probes /= np.linalg.norm(probes, axis=0)
    for v in probes.T:
        assert res.value >= abs(deviation_objective(prob, v)) - 1e-12


def test_solver_deterministic_and_json():
    prob = problem(5, d=6, n=40, p=4)
    a = maximize_deviation(prob, seed=3)
    b = maximize_deviation(prob, seed=3)
    assert a.to_json() == b.to_json()
    back = json.loads(a.to_json())
    assert np.array_equal(np.array(back["argmax"]), a.argmax)
    assert back["value"] == a.value


def test_solver_config_validation():
    with pytest.raises(InvalidParameterError):
        SolverConfig(restarts=0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(shrink=1.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig.from_json({"restarts": 3, "momentum": 0.9})
    cfg = SolverConfig(restarts=7)
    assert SolverConfig.from_json(cfg.to_json()) == cfg
    assert SolverConfig().resolution_for(2) == 100_000
    assert SolverConfig().resolution_for(3) == 200_000


# ---------------------------------------------------------------- oracles

def test_exact_p2_examples():
    s = gauss([1.0, 1.0])
    assert exact_oracle_p2(fixed_sample(s, [[1.0, 0.0]]), s) == 1.0
    assert exact_oracle_p2(fixed_sample(s, [[1.0, 1.0]]), s) == pytest.approx(1.0, abs=1e-15)
    big = gauss([1.0] * 2049)
    with pytest.raises(UnsupportedError):
        exact_oracle_p2(fixed_sample(big, np.zeros((1, 2049))), big)


def test_grid_zero_objective():
    s = gauss([1.0, 1.0])
    prob = DeviationProblem(fixed_sample(s, np.zeros((4, 2))), s, 3)
    assert grid_oracle(prob, 1000) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_grid_p2_matches_eigensolver(seed):
    for d in (2, 3):
        prob = problem(seed, d=d, n=10, p=2)
        assert abs(grid_oracle(prob, 100_000 if d == 2 else 20_000) - exact_oracle_p2(prob.sample, prob.spec)) < 1e-6


def test_grid_rotation_invariance():
    s = gauss([1.0, 1.0])
    X = sample(s, 9, 4).data
    phi = 0.7
    R = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    a = DeviationProblem(fixed_sample(s, X), s, 3)
    b = DeviationProblem(fixed_sample(s, X @ R.T), s, 3)
    va, ua = grid_oracle(a, 100_000, return_argmax=True)
    vb, ub = grid_oracle(b, 100_000, return_argmax=True)
    assert abs(va - vb) < 1e-9
    rotated = R @ ua
    assert min(np.linalg.norm(rotated - ub), np.linalg.norm(rotated + ub)) < 1e-4


def test_grid_unsupported_dimension():
    with pytest.raises(UnsupportedError):
        grid_oracle(problem(1, d=4), 100)


def test_multilinear_examples():
    s = gauss([1.0, 1.0])
    assert multilinear_grid_sup(fixed_sample(s, [[1.0, 0.0]]), s, 2, 64) == pytest.approx(1.0, abs=1e-15)
    assert multilinear_grid_sup(fixed_sample(s, np.zeros((3, 2))), s, 3, 32) == 0.0
    with pytest.raises(UnsupportedError):
        multilinear_grid_sup(fixed_sample(s, np.zeros((3, 2))), s, 4, 32)
    with pytest.raises(UnsupportedError):
        multilinear_grid_sup(fixed_sample(s, np.zeros((3, 2))), s, 2, 401)


@pytest.mark.parametrize("case", range(20))
def test_single_vector_reduction(case):
    p = 2 + case % 2
    res = 200 if p == 2 else 120
    s = gauss([1.5, 0.5])
    smp = sample(s, 12, 1000 + case)
    single = grid_oracle(DeviationProblem(smp, s, p), res * 50)
    multi = multilinear_grid_sup(smp, s, p, res)
    eps = grid_gap_bound(max(single, multi), p, res)
    assert -eps <= multi - single <= eps
