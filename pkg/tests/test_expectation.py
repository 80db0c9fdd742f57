import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qscost.cost import KeyCost, PositionalCost, SymbolCost, parse_cost
from qscost.expectation import (H_fn, J_of_prefix, L_fn, envelope, expected_key_closed,
                                expected_quickrand, expected_S, expected_S_integral,
                                expected_S_series, prefix_term, prefix_term_direct)
from qscost.source import FundamentalInterval, Intermittent, Markov, bernoulli, uniform_binary


def test_L_values():
    assert L_fn(0.5) == 2.0
    assert L_fn(0.0) == pytest.approx(2 * (1 + math.log(2)))
    assert L_fn(1.5) == pytest.approx(2 * (1 - math.log(2)))
    with pytest.raises(ValueError):
        H_fn(-0.1)


@pytest.mark.parametrize("h", [1e-3, 1e-5, 1e-7, 1e-9])
def test_L_continuous_at_half(h):
    assert abs(L_fn(0.5 - h) - L_fn(0.5 + h)) < 50 * h * (1 + abs(math.log(h)))


def test_L_monotone_and_decays():
    y = np.linspace(0, 50, 20001)
    v = L_fn(y)
    assert np.all(np.diff(v) <= 1e-15)
    assert L_fn(1e6) < 1e-5


def test_key_closed():
    assert expected_key_closed(0) == 2.0
    assert expected_key_closed(1) == 2.0
    assert expected_key_closed(0.5) == pytest.approx(2 * (1 + math.log(2)))


def test_J_examples():
    assert J_of_prefix(FundamentalInterval(0, 1), 0) == pytest.approx(2.0)
    assert J_of_prefix(FundamentalInterval(0.5, 1), 0.75) == pytest.approx(1 + math.log(2))


def test_J_against_quadrature_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = np.sort(rng.random(2))
        if b - a < 1e-3:
            continue
        alpha = rng.random()
        closed, quad = J_of_prefix(FundamentalInterval(a, b), alpha, debug=True)
        assert closed == pytest.approx(quad, abs=1e-5)


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_direct_triangle_equals_closed_form(a, b, alpha):
    a, b = min(a, b), max(a, b)
    if b - a < 1e-9:
        return
    assert float(prefix_term_direct(a, b, alpha)) == pytest.approx(
        float(prefix_term(a, b, alpha)), rel=1e-9, abs=1e-12)


def test_envelope_at_eps_to_zero():
    # with c = 1 and eps -> 0, the unit-triangle integral of the kernel times 1 is 1 + ln 2
    assert float(envelope(1.0, 1e-7, 0.5)) == pytest.approx(2 * (1 + math.log(2)), rel=1e-5)


def test_series_quickmin_constant():
    r = expected_S_series(uniform_binary(), 0.0, 1e-4)
    assert r.value == pytest.approx(5.27938, abs=1e-3)
    assert r.error <= 1e-4 and r.error >= 0 and not r.flagged


@pytest.mark.parametrize("alpha", [0.1, 0.3])
def test_series_symmetry(alpha):
    ub = uniform_binary()
    a = expected_S_series(ub, alpha, 1e-4)
    b = expected_S_series(ub, 1 - alpha, 1e-4)
    assert abs(a.value - b.value) <= 2e-4


def test_series_error_bound_is_honest():
    ub = uniform_binary()
    ref = expected_S_series(ub, 0.3, 1e-5)
    for tol in (1e-2, 1e-3):
        r = expected_S_series(ub, 0.3, tol)
        assert abs(r.value - ref.value) <= r.error + ref.error
        assert r.error <= tol


@pytest.mark.parametrize("src", [uniform_binary(), bernoulli(0.3)])
@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_series_integral_agree(src, alpha):
    s = expected_S_series(src, alpha, 1e-3)
    i = expected_S_integral(src, SymbolCost(), alpha, 1e-3)
    assert abs(s.value - i.value) <= s.error + i.error + 1e-12


def test_integral_key_grid():
    ub = uniform_binary()
    for alpha in np.linspace(0, 1, 11):
        assert expected_S_integral(ub, KeyCost(), alpha).value == pytest.approx(
            expected_key_closed(alpha), abs=1e-8)


def test_integral_position_costs_exact():
    ub = uniform_binary()
    # pos:2 charges pairs sharing the first symbol: the two depth-1 triangles
    want = float(np.sum(prefix_term(np.array([0, .5]), np.array([.5, 1]), 0.3)))
    assert expected_S_integral(ub, parse_cost("pos:2"), 0.3).value == pytest.approx(want, abs=1e-12)
    assert expected_S_integral(ub, parse_cost("pos:1"), 0.3).value == pytest.approx(
        expected_key_closed(0.3), abs=1e-10)


def test_integral_table_of_ones_is_symbol():
    src = bernoulli(0.3)
    ones = PositionalCost(np.ones((3, 2, 2)), 1.0)
    a = expected_S_integral(src, ones, 0.4, 1e-3)
    b = expected_S_integral(src, SymbolCost(), 0.4, 1e-3)
    assert abs(a.value - b.value) <= a.error + b.error


def test_integral_table_matches_linear_combination():
    # c_1 = 2 everywhere, then 1: beta = symbol + key
    ub = uniform_binary()
    tab = PositionalCost(np.array([np.full((2, 2), 2.0)]), 1.0)
    r = expected_S_integral(ub, tab, 0.2, 1e-3)
    s = expected_S_series(ub, 0.2, 1e-3)
    assert r.value == pytest.approx(s.value + expected_key_closed(0.2), abs=r.error + s.error)


def test_integral_general_cost_by_brute_force_quadrature():
    # pos:2 for Bernoulli(0.3) by a plain 2-D quadrature of beta times kernel
    src = bernoulli(0.3)
    alpha = 0.6
    cut = 0.3

    def kern(u, t):
        return 1.0 / (max(t, alpha) - min(u, alpha))

    total = 0.0
    for lo, hi in ((0.0, cut), (cut, 1.0)):  # both seeds in the same first-symbol cell
        pts = [alpha] if lo < alpha < hi else None
        v, _ = integrate.quad(lambda t: integrate.quad(lambda u: kern(u, t), lo, t,
                                                       epsabs=1e-12)[0],
                              lo, hi, points=pts, epsabs=1e-11, limit=200)
        total += 2 * v
    got = expected_S_integral(src, parse_cost("pos:2"), alpha).value
    assert got == pytest.approx(total, abs=1e-7)


def test_duffy_rejects_symbol_costs():
    with pytest.raises(ValueError):
        expected_S_integral(uniform_binary(), SymbolCost(), 0.3, quadrature="duffy")


def test_dispatch():
    ub = uniform_binary()
    assert expected_S(ub, KeyCost(), 0.0).value == 2.0
    assert expected_S(ub, KeyCost(), 0.0, "closed").method == "closed"
    with pytest.raises(ValueError):
        expected_S(ub, SymbolCost(), 0.0, "closed")
    with pytest.raises(ValueError):
        expected_S(ub, KeyCost(), 0.0, "series")
    with pytest.raises(ValueError):
        expected_S(ub, KeyCost(), 1.5)


def test_quickrand_single_panel():
    r = expected_quickrand(uniform_binary(), KeyCost(), panels=1, order=1)
    assert r.value == expected_key_closed(0.5)


def test_quickrand_key():
    assert expected_quickrand(uniform_binary(), KeyCost()).value == pytest.approx(3.0, abs=1e-6)


def test_markov_and_intermittent_series_run():
    m = Markov([0.5, 0.5], [[0.7, 0.3], [0.4, 0.6]])
    s = expected_S_series(m, 0.3, 1e-3)
    i = expected_S_integral(m, SymbolCost(), 0.3, 1e-3)
    assert abs(s.value - i.value) <= s.error + i.error
    src = Intermittent(2, 6.0)
    r = expected_S_series(src, 0.3, 5e-2, max_depth=60)
    assert r.value > 0 and r.error >= 0
