import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qscost.algo import (SeedArray, SeedCollisionError, run_quickquant,
                         run_quickselect_random_pivot, run_quickval, seed_stream, target_rank)
from qscost.cost import KeyCost, SymbolCost
from qscost.source import bernoulli, uniform_binary

UB = uniform_binary()
KEY = KeyCost()


def naive_quickval_key(u, alpha):
    """Textbook recursion on Python lists."""
    L, R, total = 0.0, 1.0, 0
    while True:
        elig = [x for x in u if L < x < R]
        if not elig:
            return total
        v = elig[0]
        total += len(elig) - 1
        if v < alpha:
            L = v
        else:
            R = v


def test_quickval_examples():
    s = SeedArray([0.5, 0.25, 0.75])
    assert run_quickval(UB, KEY, s, 0.0).total == 2
    r = run_quickval(UB, KEY, s, 0.9)
    assert r.total == 2 and list(r.pivot_seeds) == [0.5, 0.75]
    assert run_quickval(UB, KEY, [0.4], 0.3).total == 0


def test_quickquant_examples():
    s = SeedArray([0.5, 0.25, 0.75])
    r = run_quickquant(UB, KEY, s, 2)
    assert r.total == 2 and r.pivots == 1 and r.intervals[-1] == (0.5, 0.5)
    r = run_quickquant(UB, KEY, s, 1)
    assert list(r.per_pivot) == [2.0, 0.0]
    assert run_quickquant(UB, KEY, [0.4], 1).total == 0


def test_random_pivot_examples():
    rng = np.random.default_rng(0)
    assert run_quickselect_random_pivot(UB, KEY, [0.4], 1, rng).total == 0
    for m in (1, 2):
        for _ in range(10):
            assert run_quickselect_random_pivot(UB, KEY, [0.2, 0.7], m, rng).total == 1


@settings(max_examples=50)
@given(st.integers(1, 200), st.floats(0, 1), st.integers(0, 10_000))
def test_quickval_key_matches_naive(n, alpha, rep):
    s = SeedArray.generate(n, 99, rep)
    r = run_quickval(UB, KEY, s, alpha)
    assert r.total == naive_quickval_key(list(s.seeds), alpha)
    assert r.total == math.fsum(r.per_pivot)
    assert r.pivots <= n


@settings(max_examples=30)
@given(st.integers(2, 150), st.floats(0, 1), st.integers(0, 1000))
def test_quickval_interval_nesting(n, alpha, rep):
    r = run_quickval(bernoulli(0.3), SymbolCost(), SeedArray.generate(n, 5, rep), alpha)
    prev = (0.0, 1.0)
    for L, R in r.intervals:
        assert prev[0] <= L and R <= prev[1]
        assert L <= alpha <= R
        prev = (L, R)


@settings(max_examples=40)
@given(st.integers(1, 150), st.integers(0, 1000), st.data())
def test_quickquant_finds_target(n, rep, data):
    m = data.draw(st.integers(1, n))
    s = SeedArray.generate(n, 3, rep)
    r = run_quickquant(UB, KEY, s, m)
    target = np.sort(s.seeds)[m - 1]
    assert target in r.pivot_seeds or r.intervals[-1][0] < target < r.intervals[-1][1]
    # the last pivot is the m-th smallest when the interval collapses
    if r.intervals[-1][0] == r.intervals[-1][1]:
        assert r.pivot_seeds[-1] == target


def test_symbol_cost_at_least_key_cost():
    s = SeedArray.generate(500, 1, 0)
    k = run_quickval(UB, KEY, s, 0.3)
    b = run_quickval(UB, SymbolCost(), s, 0.3)
    assert b.total >= k.total
    assert b.comparisons == k.comparisons


def test_quickquant_width_moment_bound():
    reps, n = 3000, 200
    widths = {k: [] for k in range(1, 7)}
    for rep in range(reps):
        r = run_quickquant(UB, KEY, SeedArray.generate(n, 7, rep), target_rank(0.5, n))
        iv = r.intervals + [r.intervals[-1]] * 10
        for k in widths:
            widths[k].append(iv[k - 1][1] - iv[k - 1][0])
    for p in (1, 2, 4):
        for k, w in widths.items():
            w = np.asarray(w) ** p
            bound = ((2 - 2 ** -p) / (p + 1)) ** k
            assert w.mean() <= bound + 3 * w.std() / math.sqrt(reps)


def test_seed_array_validation():
    with pytest.raises(SeedCollisionError):
        SeedArray([0.1, 0.1])
    with pytest.raises(ValueError):
        SeedArray([0.0, 0.5])
    with pytest.raises(ValueError):
        run_quickval(UB, KEY, [0.3, 0.3], 0.5)
    with pytest.raises(ValueError):
        run_quickquant(UB, KEY, [0.3, 0.4], 3)
    with pytest.raises(ValueError):
        run_quickval(UB, KEY, [0.3], 1.5)


def test_seed_stream_prefix_property():
    a = seed_stream(1, 4, 100)
    b = seed_stream(1, 4, 1000)
    np.testing.assert_array_equal(a, b[:100])
    np.testing.assert_array_equal(SeedArray.generate(50, 1, 4).seeds, a[:50])


def test_target_rank():
    assert target_rank(0.0, 10) == 1
    assert target_rank(1.0, 10) == 10
    assert target_rank(0.5, 10) == 6
    assert target_rank(0.5, 1) == 1


def test_determinism():
    s = SeedArray.generate(2000, 11, 3)
    a = run_quickquant(bernoulli(0.3), SymbolCost(), s, 700)
    b = run_quickquant(bernoulli(0.3), SymbolCost(), SeedArray.generate(2000, 11, 3), 700)
    assert a.total == b.total and np.array_equal(a.per_pivot, b.per_pivot)


def test_key_mean_matches_quickmin_formula():
    # QuickMin key comparisons have mean 2n - 2H_n
    n = 1000
    vals = [run_quickval(UB, KEY, SeedArray.generate(n, 2, r), 0.0).total for r in range(400)]
    harmonic = sum(1 / i for i in range(1, n + 1))
    assert abs(np.mean(vals) - (2 * n - 2 * harmonic)) < 4 * np.std(vals) / math.sqrt(len(vals))


def test_quickmin_small_n_exact():
    # n = 3: mean 7/3 by enumeration of pivot orders
    rng = np.random.default_rng(0)
    vals = [run_quickval(UB, KEY, rng.random(3), 0.0).total for _ in range(20000)]
    assert abs(np.mean(vals) - 7 / 3) < 4 * np.std(vals) / math.sqrt(len(vals))
