import json
import subprocess
import sys

import numpy as np
import pytest

from evar import Distribution, HypothesisPair
from evar.cli import _wealth_text, run


@pytest.fixture
def pair_file(tmp_path):
    pair = HypothesisPair(Distribution.discrete([0, 1, 2, 3], [0.4, 0.3, 0.2, 0.1]),
                          Distribution.discrete([0, 1, 2, 3], [0.1, 0.2, 0.3, 0.4]))
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(pair.to_json()))
    return str(path)


def load(path):
    return json.loads(open(path).read())


def test_counterexample_command(tmp_path):
    out = tmp_path / "v.json"
    assert run(["counterexample", "--mu", "0.25", "--c", "3", "--out", str(out)]) == 0
    doc = load(out)
    assert doc["config"] == {"command": "counterexample", "mu": 0.25, "c": 3.0, "seed": 0}
    res = doc["result"]
    assert res["gap"] > 0 and res["hypothesis"] is True
    for key in ("lambda_star", "lambda_new", "growth_estar", "growth_eprime", "gap", "grad_at_star"):
        assert key in res


def test_clip_bounds_rejected(pair_file, capsys):
    assert run(["clip", "--pair", pair_file, "--c1", "1.2", "--c2", "0.9"]) == 1
    assert "infeasible bounds" in capsys.readouterr().err


def test_kelly_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["kelly", "--q", "0.75", "--epsilon", "1", "--rounds", "10", "--seed", "7"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "round,y,e_value,wealth"
    assert len(rows) == 11


def test_wealth_text_survives_overflow():
    assert _wealth_text(0.0) == "1"
    assert _wealth_text(np.log(2.5)) == "2.5"
    big = _wealth_text(1000 * np.log(10) + np.log(3.25))
    assert big.startswith("3.25") and big.endswith("e+1000")


@pytest.mark.parametrize("argv,keys", [
    (["ldp-solve", "--epsilon", "1"], {"t", "m0", "m1", "v0", "v1", "J", "residual"}),
    (["quantize"], {"t_star", "u0", "u1", "growth", "residual"}),
    (["clip", "--c1", "0.5", "--c2", "3"], {"lambda_star", "growth", "null_expectation"}),
    (["moment", "--C", "2"], {"lambda", "gamma", "growth", "max_kkt_residual"}),
    (["convex", "--penalty", "xlogx", "--C", "0.2"], {"lambda", "gamma", "growth", "penalty_residual"}),
    (["oracle", "ldp", "--epsilon", "1"], {"best_value", "best_config", "evaluations"}),
    (["oracle", "quantize"], {"best_value", "best_config", "evaluations"}),
])
def test_pair_commands(pair_file, tmp_path, argv, keys):
    out = tmp_path / "r.json"
    assert run(argv + ["--pair", pair_file, "--out", str(out)]) == 0
    assert keys <= set(load(out)["result"])


def test_repeat_runs_are_byte_identical(pair_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["moment", "--pair", pair_file, "--C", "1.5", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_floats_have_twelve_digits(pair_file, tmp_path):
    out = tmp_path / "r.json"
    run(["ldp-solve", "--pair", pair_file, "--epsilon", "1", "--out", str(out)])
    v = load(out)["result"]["v1"]
    assert len(repr(v).replace(".", "").lstrip("0")) <= 12


def test_infeasible_moment_writes_diagnostics(pair_file, tmp_path):
    out = tmp_path / "r.json"
    assert run(["moment", "--pair", pair_file, "--C", "0", "--out", str(out)]) == 2
    assert load(out)["result"]["status"] == "infeasible"


@pytest.mark.parametrize("constraint", [["clip", "--c1", "0.5", "--c2", "3"], ["quantize"],
                                        ["moment", "--C", "1.15"], ["ldp", "--epsilon", "1"]])
def test_composite_command(tmp_path, constraint):
    out = tmp_path / "r.json"
    argv = ["composite", "--family", "gauss-mlr", "--theta0", "0", "--theta1", "0.5",
            "--null-grid=-1,-0.5,0", "--alt-grid", "0.5,0.75,1", "--constraint", *constraint, "--out", str(out)]
    assert run(argv) == 0
    res = load(out)["result"]
    assert res["ok"] is True and res["argmin_alt_growth"] == "theta=0.5"


def test_composite_missing_flag(capsys):
    argv = ["composite", "--theta0", "0", "--theta1", "0.5", "--null-grid=-1", "--alt-grid", "1",
            "--constraint", "clip"]
    assert run(argv) == 1
    assert "--c1" in capsys.readouterr().err


def test_usage_errors(pair_file, capsys):
    assert run(["bogus"]) == 1
    assert run(["clip", "--pair", pair_file, "--c1", "0.5", "--c2", "3", "--nope"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run(["quantize", "--pair", "/nonexistent.json"]) == 1


def test_bad_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"null": {"type": "discrete", "support": [0, 1], "probs": [0.5, 0.7]},
                               "alt": {"type": "bernoulli", "p": 0.5}}))
    assert run(["quantize", "--pair", str(bad)]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "evar", "counterexample"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["invariants_hold"] is True
