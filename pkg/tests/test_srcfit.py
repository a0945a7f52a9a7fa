import math

import numpy as np
import pytest

from lavreg.grid import constant, heaviside, make_uniform_grid, norm, random_function, sample, zeros
from lavreg.lavrentiev import LinearProblem, bias_linear
from lavreg.linops import (
    LinearMonotoneOperator,
    cesaro_operator,
    multiplication_operator,
    volterra_operator,
    zero_operator,
)
from lavreg.srcfit import (
    DecayModel,
    DistanceCurve,
    bias_bound_from_distance,
    cesaro_witness,
    cesaro_witness_bound,
    concave_majorant,
    constrained_distance_pg,
    distance_at,
    distance_function,
    fit_decay,
    psi_parameter_choice,
    verify_cesaro_witness,
)

MU = np.logspace(1, -12, 53)


@pytest.fixture(scope="module")
def cesaro_curve():
    g = make_uniform_grid(1000)
    return distance_function(cesaro_operator(g), heaviside(g), MU, "heaviside")


def synthetic(fn, lo=10.0, hi=1e6, m=60):
    R = np.logspace(math.log10(lo), math.log10(hi), m)
    return DistanceCurve(tuple(R), tuple(fn(R)))


def test_benchmark_element_collapses():
    g = make_uniform_grid(100)
    V = volterra_operator(g)
    w0 = sample(g, lambda t: np.cos(np.pi * t))
    curve = distance_function(V, V.apply(w0), np.logspace(0, -16, 65))
    assert curve.d[-1] < 1e-8
    assert distance_at(V, V.apply(w0), norm(w0)) <= 1e-8
    assert curve.R.max() <= norm(w0) * (1 + 1e-8)


def test_orthogonal_element_has_constant_distance():
    g = make_uniform_grid(50)
    u = random_function(g, 1)
    Z = zero_operator(g)
    for R in (0.0, 1.0, 1e6):
        assert distance_at(Z, u, R) == pytest.approx(norm(u), rel=1e-14)
    with pytest.raises(ValueError):
        distance_function(Z, u, MU)
    # a multiplication operator vanishing on half the interval: u on that half is unreachable
    M = multiplication_operator(g, lambda t: np.where(t < 0.5, 0.0, 1.0))
    v = sample(g, lambda t: (t < 0.5).astype(float))
    for R in (0.5, 10.0):
        assert distance_at(M, v, R) == pytest.approx(norm(v), rel=1e-14)


def test_cesaro_distance_decay(cesaro_curve):
    R, d = cesaro_curve.R, cesaro_curve.d
    sel = (R >= 10) & (R <= 100)
    assert sel.sum() >= 5
    assert np.all(d[sel] <= 1.0 / R[sel])


def test_mu_grid_preconditions():
    g = make_uniform_grid(20)
    V = volterra_operator(g)
    u = constant(g)
    with pytest.raises(ValueError):
        distance_function(V, u, np.logspace(0, -5, 10))
    with pytest.raises(ValueError):
        distance_function(V, u, np.logspace(-8, 0, 10))


def test_singular_normal_equations_rejected():
    g = make_uniform_grid(20)
    M = multiplication_operator(g, lambda t: np.where(t < 0.5, 1e-9, 1.0))
    curve = distance_function(M, constant(g), np.logspace(0, -16, 33))
    assert curve.rejected_mu and min(curve.mu_values) > max(curve.rejected_mu)


def test_path_monotone_and_convex(cesaro_curve):
    mu = np.asarray(cesaro_curve.mu_values)
    assert np.all(np.diff(mu) < 0)
    assert np.all(np.diff(cesaro_curve.R) > 0)
    assert np.all(np.diff(cesaro_curve.d) < 0)
    assert cesaro_curve.is_convex()


def test_distance_is_not_concave(cesaro_curve):
    # d(R) is the value function of a convex program; concavity would need
    # second differences <= 0 and they are strictly positive here
    assert np.all(cesaro_curve.second_differences() > 0)


def test_index_function_properties(cesaro_curve):
    c = cesaro_curve
    alphas = np.logspace(math.log10(c.phi().min()) + 0.01, math.log10(c.phi().max()) - 0.01, 40)
    dphi = np.array([c.distance(c.phi_inverse(a)) for a in alphas])
    assert np.all(np.diff(dphi) > 0)
    ratio = alphas / dphi
    assert np.all(np.diff(ratio) > 0)


def test_fit_decay_synthetic():
    m = fit_decay(synthetic(lambda R: 1 / R))
    assert m.kind == "power" and m.exponent == pytest.approx(-1, abs=1e-10)
    assert m.implied_p == pytest.approx(0.5, abs=1e-10)
    m = fit_decay(synthetic(lambda R: 1 / np.log(R)))
    assert m.kind == "logarithmic" and m.exponent == pytest.approx(1, abs=1e-10)
    with pytest.raises(ValueError):
        fit_decay(DistanceCurve(tuple(np.logspace(1, 3, 20)), tuple(np.linspace(1, 1 - 1e-9, 20))))
    with pytest.raises(ValueError):
        fit_decay(synthetic(lambda R: 1 / R, m=8))


def test_fit_decay_benchmark_collapse():
    R = np.linspace(0.1, 1.0, 12)
    d = np.concatenate([np.linspace(1.0, 1e-3, 8), [1e-11, 1e-12, 1e-13, 1e-14]])
    m = fit_decay(DistanceCurve(tuple(R), tuple(d)))
    assert m.kind == "benchmark" and m.constant == pytest.approx(R[8])


def test_fit_cesaro(cesaro_curve):
    m = fit_decay(cesaro_curve)
    assert m.kind == "power"
    assert m.exponent == pytest.approx(-1, abs=0.15)


def test_decay_model_invariants():
    with pytest.raises(ValueError):
        DecayModel("power", 0.5, 1.0, (1, 2), 0.0)
    with pytest.raises(ValueError):
        DecayModel("logarithmic", -1.0, 1.0, (1, 2), 0.0)


def test_bias_bound_synthetic():
    c = synthetic(lambda R: 1 / R, lo=1.0, hi=1e6, m=121)
    for a in (1e-2, 1e-4, 1e-8):
        assert bias_bound_from_distance(c, a) == pytest.approx(2 * math.sqrt(a), rel=1e-10)
    with pytest.raises(ValueError):
        bias_bound_from_distance(c, 1e-14)
    with pytest.raises(ValueError):
        bias_bound_from_distance(c, 10.0)


def test_bias_bound_cesaro(cesaro_curve):
    g = make_uniform_grid(1000)
    P = LinearProblem(cesaro_operator(g), heaviside(g), zeros(g))
    for a in (1e-2, 1e-3):
        assert bias_bound_from_distance(cesaro_curve, a) >= bias_linear(P, a)


def test_benchmark_curve_bias_bound_refused():
    g = make_uniform_grid(60)
    V = volterra_operator(g)
    curve = distance_function(V, V.apply(constant(g)), np.logspace(0, -16, 65))
    with pytest.raises(ValueError):
        bias_bound_from_distance(curve, 1e-14)


def test_psi_choice():
    c = synthetic(lambda R: 1 / R, lo=1.0, hi=1e6, m=121)
    deltas = np.logspace(-12, -2, 6)
    alphas = [psi_parameter_choice(c, d) for d in deltas]
    assert np.polyfit(np.log(deltas), np.log(alphas), 1)[0] == pytest.approx(2 / 3, abs=1e-9)
    flat = synthetic(lambda R: 1.0 - 1e-3 * np.log(R), lo=1.0, hi=1e6, m=121)
    alphas = [psi_parameter_choice(flat, d) for d in np.logspace(-5, -3, 4)]
    assert np.polyfit(np.log(np.logspace(-5, -3, 4)), np.log(alphas), 1)[0] == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        psi_parameter_choice(c, 10.0)


def test_psi_choice_cesaro(cesaro_curve):
    d = 1e-4
    a = psi_parameter_choice(cesaro_curve, d)
    assert d < a < math.sqrt(d)


def test_concave_majorant(cesaro_curve):
    maj = concave_majorant(cesaro_curve)
    assert np.all(maj.d >= cesaro_curve.d)
    x, y = np.log(maj.R), np.log(maj.d)
    slopes = np.diff(y) / np.diff(x)
    assert np.all(np.diff(slopes) <= 1e-12)
    assert np.all(np.diff(maj.d) < 0)


def test_witness_examples():
    g = make_uniform_grid(2000)
    for R in (5.0, 10.0, 20.0, 30.0):
        assert verify_cesaro_witness(g, R) <= cesaro_witness_bound(R)
    assert verify_cesaro_witness(g, 10.0) <= 0.11
    assert norm(cesaro_witness(g, 10.0)) <= 10
    with pytest.raises(ValueError):
        verify_cesaro_witness(g, 40.0)
    with pytest.raises(ValueError):
        verify_cesaro_witness(g, 1.5)
    C = cesaro_operator(g)
    assert norm(C.apply(constant(g)) - C.apply(constant(g))) == 0.0
    assert distance_at(C, C.apply(constant(g)), 1.0) <= 1e-8


def test_witness_dominated_by_optimum():
    g = make_uniform_grid(2000)
    C = cesaro_operator(g)
    u = heaviside(g)
    for R in (10.0, 20.0, 30.0):
        assert distance_at(C, u, R) <= verify_cesaro_witness(g, R) + 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_duality_against_projected_gradient(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 31))
    g = make_uniform_grid(n)
    # random monotone operator: positive semidefinite symmetric part plus a skew part
    B = rng.standard_normal((n, n))
    S = rng.standard_normal((n, n))
    A = LinearMonotoneOperator(g, 0.2 * B @ B.T / n + 0.5 * (S - S.T) / n, "random-monotone")
    u = random_function(g, rng)
    curve = distance_function(A, u, np.logspace(1, -6, 15))
    for R, d in zip(curve.radii[::3], curve.distances[::3]):
        assert constrained_distance_pg(A, u, R) == pytest.approx(d, abs=1e-6)


def test_distance_csv(tmp_path, cesaro_curve):
    from lavreg.io import read_csv

    header, data = read_csv(cesaro_curve.write_csv(tmp_path / "d.csv"))
    assert header == ["mu", "R", "d"]
    assert np.array_equal(data[:, 1], cesaro_curve.R)
