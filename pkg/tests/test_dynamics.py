import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oswi.activations import CATALOG, evaluate, omega, tanh
from oswi.dynamics import (SUB_CRITICAL, SUPER_CRITICAL, bifurcation_scan, compose_varying,
                           iterate, solve_xi, steps_to_reach, stochastic_floor_probability)
from oswi.errors import DomainError, NoSuchR
from oswi.special import norm_cdf

# xi at a = 1.3 omega, frozen from mpmath.findroot at 50 digits
MPMATH_XI = {
    "tanh": 0.75205763665563091514,
    "erf": 0.81669530501377910367,
    "arctann": 0.5176611001843731212,
    "softsign2": 0.6389710663783134502,
    "gd": 1.1024578169137802675,
    "softsign3": 0.81674790876228235228,
}


@pytest.mark.parametrize("name", sorted(MPMATH_XI))
def test_xi_matches_findroot_oracle(name):
    spec = CATALOG[name]
    fp = solve_xi(spec, 1.3 * omega(spec))
    assert fp.regime == SUPER_CRITICAL
    assert fp.xi_a == pytest.approx(MPMATH_XI[name], rel=1e-13)
    assert fp.residual <= 1e-14
    assert fp.points == (-fp.xi_a, 0.0, fp.xi_a)


def test_tanh_gain_two():
    assert solve_xi(tanh(), 2.0).xi_a == pytest.approx(0.95750402407726874068, rel=1e-14)


@pytest.mark.parametrize("a", [0.1, 0.9, 1.0])
def test_subcritical_has_only_zero(a):
    fp = solve_xi(tanh(), a)
    assert fp.regime == SUB_CRITICAL and fp.points == (0.0,)


def test_saturated_supremum_is_returned():
    # tanh(1e4 x) - x vanishes at x = 1 in floating point
    fp = solve_xi(tanh(), 1e4)
    assert fp.xi_a == 1.0 and fp.residual == 0.0


def test_xi_near_criticality_follows_normal_form():
    # for a = 1 + eps, tanh(a x) = x gives xi ~ sqrt(3 eps)
    eps = 1e-6
    assert solve_xi(tanh(), 1 + eps).xi_a == pytest.approx(math.sqrt(3 * eps), rel=1e-5)


def test_iterate_and_convergence():
    tr = iterate(tanh(), 1.3, 0.1, 60)
    assert tr.values.shape == (61,)
    assert tr.values[0] == 0.1
    assert tr.converged_to == pytest.approx(MPMATH_XI["tanh"], abs=1e-8)
    neg = iterate(tanh(), 1.3, -0.1, 60)
    assert neg.converged_to == pytest.approx(-MPMATH_XI["tanh"], abs=1e-8)
    assert iterate(tanh(), 1.3, 0.0, 10).converged_to == 0.0
    with pytest.raises(DomainError):
        iterate(tanh(), 1.3, 0.1, 0)


def test_compose_varying_order_and_shapes():
    spec = tanh()
    gains = [2.0, 0.5, 3.0]
    manual = evaluate(spec, 3.0 * evaluate(spec, 0.5 * evaluate(spec, 2.0 * 0.2)))
    assert compose_varying(spec, gains, 0.2) == manual
    g = np.array([[2.0, 1.0], [0.5, 1.0], [3.0, 1.0]])
    out = compose_varying(spec, g, np.array([0.2, 0.2]))
    assert out[0] == manual
    assert out[1] == evaluate(spec, evaluate(spec, evaluate(spec, 0.2)))
    with pytest.raises(DomainError):
        compose_varying(spec, [], 0.2)


def test_steps_to_reach():
    r = steps_to_reach(tanh(), 1.2, 0.1, 0.3)
    x = 0.1
    for _ in range(r - 1):
        x = math.tanh(1.2 * x)
        assert x < 0.3
    assert math.tanh(1.2 * x) >= 0.3
    with pytest.raises(NoSuchR):
        steps_to_reach(tanh(), 1.2, 0.1, 0.99)


def test_floor_probability_small_case():
    est = stochastic_floor_probability(tanh(), 0.5, 50, 0.1, 0.3, 1.2, trials=2000, seed=3)
    assert est.r == 7
    assert est.bound == pytest.approx((1 - norm_cdf(0.2 / 0.5)) ** 7, rel=1e-14)
    assert 0 <= est.empirical_prob <= 1
    assert est.std_error == pytest.approx(
        math.sqrt(est.empirical_prob * (1 - est.empirical_prob) / 2000))


def test_floor_without_noise_collapses():
    est = stochastic_floor_probability(tanh(), 1e-9, 50, 0.1, 0.3, 1.2, trials=200)
    assert est.empirical_prob == 0.0 and est.bound == 0.0


@pytest.mark.parametrize("kwargs", [
    {"alpha": 0.9},                 # alpha must exceed omega
    {"x0": 0.4},                    # x0 < delta
    {"delta": 0.9},                 # delta < xi_alpha (~0.66)
    {"m": 0},
])
def test_floor_domain(kwargs):
    args = dict(spec=tanh(), sigma=0.5, m=50, x0=0.1, delta=0.3, alpha=1.2, trials=10) | kwargs
    with pytest.raises(DomainError):
        stochastic_floor_probability(**args)


def test_bifurcation_scan_rows():
    rows = bifurcation_scan(tanh(), [0.5, 1.3, 2.0], 0.1, 400)
    assert rows[0][1] == pytest.approx(0.0, abs=1e-100) and rows[0][2] == 0.0
    assert rows[1][1] == pytest.approx(rows[1][2], abs=1e-12)
    assert rows[2][2] == pytest.approx(0.95750402407726874068, rel=1e-14)


def test_gain_domain():
    with pytest.raises(DomainError):
        solve_xi(tanh(), 0.0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(CATALOG)), st.floats(1.01, 50.0))
def test_xi_is_a_fixed_point_below_the_supremum(name, ratio):
    spec = CATALOG[name]
    a = ratio * omega(spec)
    fp = solve_xi(spec, a)
    assert 0 < fp.xi_a
    assert abs(evaluate(spec, a * fp.xi_a) - fp.xi_a) <= 1e-12
    # xi grows with the gain
    assert solve_xi(spec, a * 1.1).xi_a >= fp.xi_a - 1e-12
