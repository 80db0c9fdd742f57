import math

import numpy as np
import pytest

from qscost.cost import KeyCost, SymbolCost
from qscost.harness import (ExperimentConfig, convergence_experiment, coupled_run, coupled_runs,
                            decreasing_with_inversions, distribution_compare, moment_report)
from qscost.source import bernoulli, uniform_binary

UB = uniform_binary()


def test_n_one_has_zero_finite_costs():
    v, q, s = coupled_run(1, 0, UB, KeyCost(), 0.3, 1)
    assert v == 0.0 and q == 0.0 and s >= 1.0


def test_coupled_run_is_deterministic():
    a = coupled_run(5, 2, bernoulli(0.3), SymbolCost(), 0.4, 500)
    b = coupled_run(5, 2, bernoulli(0.3), SymbolCost(), 0.4, 500)
    assert a == b


def test_first_pivots_shared():
    r = coupled_runs(5, 7, UB, KeyCost(), 0.5, [16, 128])
    assert r.first_pivots[0] == r.first_pivots[1]


def test_coupling_is_tight_for_large_n():
    devs = [abs(v - s) for v, _, s in
            (coupled_run(9, rep, UB, KeyCost(), 0.0, 10_000) for rep in range(20))]
    assert max(devs) < 0.1


def test_grid_runs_agree_with_single_runs():
    r = coupled_runs(3, 1, UB, KeyCost(), 0.25, [10, 100, 1000])
    v, q, _ = coupled_run(3, 1, UB, KeyCost(), 0.25, 100)
    assert r.quickval[1] == v and r.quickquant[1] == q


def small_config(**kw):
    base = dict(n_grid=[16, 64, 256], reps=30, p_values=[1.0, 2.0], seed=4)
    base.update(kw)
    return ExperimentConfig(**base)


def test_jensen_between_moments():
    rep = convergence_experiment(small_config())
    for algo in ("quickval", "quickquant"):
        assert np.all(rep.estimates(algo, 2.0) >= rep.estimates(algo, 1.0) ** 2 - 1e-15)


def test_config_parsing(tmp_path):
    cfg = ExperimentConfig.from_text("alpha = 0.25\nn_grid = [8, 32]\nreps = 3\nsource = bernoulli-0.3\n")
    assert cfg.alpha == 0.25 and cfg.n_grid == [8, 32] and cfg.source == "bernoulli-0.3"
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("colour = red\n")
    with pytest.raises(ValueError):
        ExperimentConfig(n_grid=[32, 8])
    with pytest.raises(ValueError):
        ExperimentConfig(p_values=[0.5])
    with pytest.raises(ValueError):
        ExperimentConfig(alpha=2.0)


def test_report_files_and_thread_determinism(tmp_path):
    one = convergence_experiment(small_config(threads=1)).write(tmp_path / "a")
    four = convergence_experiment(small_config(threads=4)).write(tmp_path / "b")
    for x, y in zip(one, four):
        assert x.read_bytes() == y.read_bytes()
    text = one[0].read_text().splitlines()
    assert text[0].startswith("# ")
    assert "n,algo,p,estimate,stderr" in text
    assert sum(1 for line in text if not line.startswith("#")) == 1 + 2 * 2 * 3


def test_decreasing_with_inversions():
    assert decreasing_with_inversions([5, 4, 3]) == 0
    assert decreasing_with_inversions([5, 6, 3, 4]) == 2


def test_ks_identical_and_shifted():
    rng = np.random.default_rng(0)
    x = rng.random(2000)
    r = distribution_compare(x, x)
    assert r.statistic == 0 and r.accept
    r = distribution_compare(x, x + 0.2)
    assert not r.accept
    with pytest.raises(ValueError):
        distribution_compare([], x)
    with pytest.raises(ValueError):
        distribution_compare(x[:10], x)


def test_moment_report():
    rows = moment_report(np.full(50, 3.0), orders=(1, 2))
    assert rows[0]["moment"] == 3.0 and rows[0]["variance"] == 0.0 and rows[0]["stderr"] == 0.0
    assert rows[1]["moment"] == 9.0
    rng = np.random.default_rng(1)
    u = rng.random(100_000)
    r = moment_report(u, orders=(1, 2, 3, 4))
    for row, k in zip(r, (1, 2, 3, 4)):
        assert row["lo"] - 3 * row["stderr"] < 1 / (k + 1) < row["hi"] + 3 * row["stderr"]
    with pytest.raises(ValueError):
        moment_report(u, orders=(5,))
    with pytest.raises(ValueError):
        moment_report([])
