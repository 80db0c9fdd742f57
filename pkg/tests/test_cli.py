import json

import pytest

from qscost.cli import dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_expect_closed_json(capsys):
    code, out, _ = run(capsys, "expect", "--method", "closed", "--cost", "key", "--alpha", "0",
                       "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["value"] == 2.0 and d["method"] == "closed" and d["config"]["alpha"] == 0.0


def test_expect_quickrand(capsys):
    code, out, _ = run(capsys, "expect", "quickrand", "--cost", "key", "--format", "json")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(3.0, abs=1e-6)


def test_simulate_n_one(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "quickval", "--n", "1", "--alpha", "0.3",
                       "--reps", "2")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "rep,n,alpha_or_m,algo,cost_model,total_cost,pivots,truncation_flag"
    assert all(l.split(",")[5] in ("0", "0.0") for l in lines[1:])


def test_simulate_qs_random(capsys):
    code, out, _ = run(capsys, "simulate", "--algo", "qs-random", "--n", "50", "--m", "10",
                       "--reps", "3", "--format", "json")
    assert code == 0 and len(json.loads(out)["rows"]) == 3


def test_usage_errors(capsys):
    assert run(capsys, "simulate", "--algo", "quickval", "--n", "10")[0] == 2
    assert run(capsys, "expect", "--cost", "key")[0] == 2
    assert run(capsys, "dickman", "--bogus")[0] == 2
    assert run(capsys, "nu-check", "--alpha", "0.5", "--rect", "1,2")[0] == 2


def test_runtime_errors(capsys):
    code, _, err = run(capsys, "expect", "--method", "closed", "--cost", "symbol", "--alpha", "0.5")
    assert code == 1 and "error" in err
    assert run(capsys, "expect", "--source", "nonsense", "--alpha", "0.5")[0] == 1


def test_source_inspect(capsys):
    code, out, _ = run(capsys, "source", "inspect", "--source", "bernoulli-0.3", "--prefix", "01")
    d = json.loads(out)
    assert code == 0 and d["a"] == pytest.approx(0.09) and d["b"] == pytest.approx(0.3)


def test_nu_check_and_sample_limit(capsys):
    code, out, _ = run(capsys, "nu-check", "--alpha", "0.5", "--rect", "0.1,0.2,0.7,0.8",
                       "--reps", "20000")
    d = json.loads(out)
    assert code == 0 and abs(d["z"]) < 4
    code, out, _ = run(capsys, "sample-limit", "--alpha", "0.2", "--reps", "5")
    assert code == 0 and len([l for l in out.splitlines() if not l.startswith("#")]) == 6


def test_output_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert dispatch(["dickman", "--reps", "50", "--seed", "3", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_converge(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("alpha = 0.5\nn_grid = [16, 64]\nreps = 10\np_values = [1.0]\n")
    outs = []
    for name, threads in (("x", "1"), ("y", "3")):
        assert dispatch(["converge", "--config", str(cfg), "--threads", threads,
                         "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "report.csv").read_bytes())
    assert outs[0] == outs[1]
    assert dispatch(["converge", "--config", str(tmp_path / "missing.txt")]) == 1
