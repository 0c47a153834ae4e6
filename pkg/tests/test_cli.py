import json
import subprocess
import sys

import numpy as np
import pytest

from binomix.cli import main
from binomix.mixture import BinomialMixtureModel, MixingDistribution, sample


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("BINOMIX_CACHE", str(tmp_path / "cache"))


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _csv(tmp_path, pi, n=60, t=8, seed=0, name="data.csv"):
    return _write(tmp_path, name, sample(BinomialMixtureModel(t, pi), n, seed).to_csv())


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gof_accepts_true_null(tmp_path, capsys):
    pi0 = MixingDistribution([0.2, 0.7])
    data = _csv(tmp_path, pi0)
    null = _write(tmp_path, "null.json", pi0.to_json())
    code, out, _ = _run(capsys, "gof", data, "--null", null, "--reps", "500", "--seed", "1")
    assert code == 0
    rep = json.loads(out)
    assert rep["statistic"] == "global_minimax" and rep["reject"] is False


def test_estimate_output_feeds_gof(tmp_path, capsys):
    data = _csv(tmp_path, MixingDistribution([0.3, 0.6]))
    code, out, _ = _run(capsys, "estimate", data, "--method", "mom")
    assert code == 0 and json.loads(out)["metadata"]["method"] == "mom"
    null = _write(tmp_path, "est.json", out)
    code, out, _ = _run(capsys, "gof", data, "--null", null, "--test", "debiased_pearson", "--reps", "300", "--seed", "2")
    assert code == 0 and "p_value" in json.loads(out)


def test_estimate_degenerate(tmp_path, capsys):
    data = _write(tmp_path, "zeros.csv", "x,t\n" + "0,5\n" * 10)
    for method in ("mle", "mom", "empirical"):
        code, out, _ = _run(capsys, "estimate", data, "--method", method)
        d = json.loads(out)
        assert code == 0
        assert d["support"][0] == 0.0 and d["weights"][0] > 0.999


def test_homog_variants(tmp_path, capsys):
    same = _write(tmp_path, "same.csv", "x,t\n" + "3,10\n" * 40)
    code, out, _ = _run(capsys, "homog", same, "--p0", "0.3", "--reps", "400", "--seed", "1")
    assert code == 0 and json.loads(out)["reject"] is False
    het = _csv(tmp_path, MixingDistribution([0.1, 0.9]), n=80, t=10, name="het.csv")
    code, out, _ = _run(capsys, "homog", het, "--free", "--reps", "300", "--grid", "21", "--seed", "1")
    assert code == 0 and json.loads(out)["reject"] is True


def test_invert_ci_and_csv_format(tmp_path, capsys):
    data = _write(tmp_path, "d.csv", "x,t\n" + "0,10\n" * 30)
    code, out, _ = _run(capsys, "invert-ci", data, "--reps", "200", "--grid", "21", "--seed", "1")
    d = json.loads(out)
    assert code == 0 and d["lower"] == 0.0 and d["rejected_all"] is False
    code, out, _ = _run(capsys, "invert-ci", data, "--reps", "200", "--grid", "21", "--seed", "1", "--format", "csv")
    assert out.splitlines()[0].startswith("lower,upper")


def test_adversarial(capsys):
    code, out, _ = _run(capsys, "adversarial", "mass-leak", "--p0", "0.2", "--eps", "0.4")
    d = json.loads(out)
    assert code == 0 and d["w1"] == pytest.approx(0.4)
    code, out, _ = _run(capsys, "adversarial", "moment-match", "--k", "3", "--center", "0.4", "--halfwidth", "0.2")
    assert json.loads(out)["constant"] == 0.2
    code, _, err = _run(capsys, "adversarial", "mean-shift", "--p0", "0.9", "--eps", "0.5")
    assert code == 2 and "outside" in err


def test_usage_errors(tmp_path, capsys):
    data = _write(tmp_path, "d.csv", "x,t\n1,2\n")
    assert _run(capsys, "gof", data, "--null", data, "--test", "nope")[0] == 1
    assert _run(capsys, "homog", data, "--p0", "0.5", "--alpha", "1.5")[0] == 1
    assert _run(capsys, "homog", data, "--p0", "0.5", "--reps", "50")[0] == 1
    code, _, err = _run(capsys, "simulate", "power", "--test", "mean_t1", "--n", "10", "--t", "2")
    assert code == 1 and "--seed" in err
    code, _, err = _run(capsys, "frobnicate")
    assert code == 1


def test_data_errors_and_json_errors(tmp_path, capsys):
    code, _, err = _run(capsys, "estimate", str(tmp_path / "missing.csv"), "--json-errors")
    assert code == 2
    e = json.loads(err)
    assert e["error"] == "data" and "missing.csv" in e["message"]
    bad = _write(tmp_path, "bad.csv", "x,t\n1,2\n5,3\n")
    code, _, err = _run(capsys, "estimate", bad)
    assert code == 2 and "line 3" in err
    data = _write(tmp_path, "d.csv", "x,t\n1,2\n")
    code, _, err = _run(capsys, "homog", data, "--p0", "1.5", "--json-errors")
    assert code == 2 and json.loads(err)["error"] == "data"
    code, _, err = _run(capsys, "gof", data, "--null", str(tmp_path / "none.json"), "--json-errors")
    assert code == 2


def test_simulate_byte_identical_across_threads(tmp_path, capsys):
    outs = []
    for threads in ("1", "3"):
        d = tmp_path / f"run{threads}"
        code, out, _ = _run(
            capsys, "simulate", "power", "--test", "local_minimax", "--family", "mean-shift", "--p0", "0.3",
            "--n", "40", "--t", "4", "--eps", "0", "0.05", "0.1", "--reps", "600", "--power-reps", "700",
            "--seed", "5", "--threads", threads, "--out", str(d),
        )
        assert code == 0
        (path,) = d.glob("*.csv")
        assert path.name == "power_local_minimax_mean-shift_n40_t4.csv"
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == "separation,power,se" and len(lines) == 4


def test_simulate_statdist_and_critsep(tmp_path, capsys):
    code, out, _ = _run(
        capsys, "simulate", "statdist", "--test", "vhat", "--p0", "0.5", "--n", "30", "--t", "4",
        "--reps", "200", "--seed", "1", "--bins", "7", "--out", str(tmp_path), "--format", "json",
    )
    assert code == 0
    meta = json.loads((tmp_path / "statdist_vhat_mean-shift_n30_t4.json").read_text())
    assert sum(meta["counts"]) == 200 and len(meta["bin_edges"]) == 8
    code, _, _ = _run(
        capsys, "simulate", "critsep", "--test", "mean_t1", "--p0", "0.3", "--n", "30", "--t", "4",
        "--reps", "300", "--power-reps", "200", "--seed", "1", "--out", str(tmp_path),
    )
    assert code == 0
    rows = (tmp_path / "critsep_mean_t1_mean-shift_n30_t4.csv").read_text().splitlines()
    assert rows[0] == "status,estimate,lower,upper,type_one"


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "binomix.cli", "adversarial", "prob-perturb", "--eps", "0.25"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["alternative"]["weights"] == [0.25, 0.75]
