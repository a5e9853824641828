import csv
import json

import numpy as np
import pytest

from dppfit.cli import main
from dppfit.geometry import read_pattern

MODEL = ["--rho", "100", "--alpha", "0.03"]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def pattern_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "pat.txt"
    assert main(["simulate", *MODEL, "--side", "1", "--seed", "3", "--out", str(path)]) == 0
    return path


def test_validate_invalid_model(capsys):
    code = main(["validate", "--family", "gaussian", "--dim", "2", "--rho", "100", "--alpha", "0.06"])
    err = capsys.readouterr().err
    assert code == 2
    assert "F(C)" in err and "> 1" in err


def test_validate_ok(capsys):
    assert main(["validate", *MODEL]) == 0
    assert capsys.readouterr().out.startswith("ok:")


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["validate", "--alpha", "0.03"],
        ["simulate", *MODEL, "--out", "x.txt"],
        ["simulate", *MODEL, "--side", "-1", "--out", "x.txt"],
        ["fit", "p.txt", "--stat", "h"],
        ["mc-study", "--config", "c.cfg", "--threads", "0"],
        ["asympt", *MODEL],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_runtime_errors(tmp_path, capsys):
    assert main(["summarize", str(tmp_path / "missing.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("not a pattern\n")
    assert main(["fit", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_simulate_is_seeded(pattern_file, tmp_path):
    p = read_pattern(pattern_file)
    assert p.window.dim == 2 and 50 < p.n < 150
    diag = _rows(str(pattern_file) + ".diag.csv")
    assert len(diag) == 1 and int(diag[0]["n_points"]) == p.n
    assert float(diag[0]["retained_mass"]) >= 0.99999
    again = tmp_path / "again.txt"
    main(["simulate", *MODEL, "--side", "1", "--seed", "3", "--out", str(again)])
    assert again.read_bytes() == pattern_file.read_bytes()


@pytest.mark.parametrize("stat", ["K", "g"])
def test_summarize(pattern_file, tmp_path, stat):
    out = tmp_path / "curve.csv"
    assert main(["summarize", str(pattern_file), "--stat", stat, "--grid", "11", "--out", str(out)]) == 0
    rows = _rows(out)
    assert list(rows[0]) == ["t", "value", "estimator", "bandwidth"]
    assert len(rows) == 11
    t = np.array([float(r["t"]) for r in rows])
    np.testing.assert_allclose(t, np.linspace(0.01, 0.25, 11))
    if stat == "K":
        assert rows[0]["estimator"] == "border" and rows[0]["bandwidth"] == ""
    else:
        assert float(rows[0]["bandwidth"]) > 0


def test_summarize_correction(pattern_file, tmp_path):
    out = tmp_path / "curve.csv"
    args = ["summarize", str(pattern_file), "--stat", "K", "--correction", "isotropic", "--out", str(out)]
    assert main(args) == 0
    assert _rows(out)[0]["estimator"] == "isotropic"


def test_fit_csv_and_json(pattern_file, tmp_path):
    out = tmp_path / "fit.csv"
    assert main(["fit", str(pattern_file), "--stat", "g", "--seed", "1", "--out", str(out)]) == 0
    (row,) = _rows(out)
    alpha = float(row["alpha"])
    assert 0.005 < alpha < 0.1
    out_j = tmp_path / "fit.json"
    assert main(["fit", str(pattern_file), "--stat", "g", "--seed", "1", "--format", "json",
                 "--out", str(out_j)]) == 0
    rec = json.loads(out_j.read_text())
    assert rec["alpha"] == alpha


def test_fit_with_asymptotics(pattern_file, tmp_path):
    out = tmp_path / "fit.json"
    args = ["fit", str(pattern_file), "--stat", "K", "--asympt", "--samples", "20000",
            "--format", "json", "--out", str(out)]
    assert main(args) == 0
    rec = json.loads(out.read_text())
    assert any(k.startswith("cov") for k in rec)


def test_asympt(tmp_path):
    out = tmp_path / "asy.csv"
    assert main(["asympt", *MODEL, "--stat", "g", "--side", "3", "--samples", "20000", "--out", str(out)]) == 0
    rows = _rows(out)
    assert list(rows[0]) == ["quantity", "i", "j", "value", "stderr"]
    names = {r["quantity"] for r in rows}
    assert {"B", "Sigma", "covariance"} <= names
    sigma = next(r for r in rows if r["quantity"] == "Sigma")
    assert float(sigma["value"]) > 0 and float(sigma["stderr"]) > 0


def test_mc_study(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(
        "model.rho = 100\nmodel.alpha = 0.03\nstudy.window_sides = 1\n"
        "study.replicates = 2\nstudy.master_seed = 5\n"
    )
    out = tmp_path / "out"
    assert main(["mc-study", "--config", str(cfg), "--out-dir", str(out)]) == 0
    est = _rows(out / "estimates.csv")
    for method in ("K", "g"):
        assert sum(r["method"] == method for r in est) == 2
    table = _rows(out / "table.csv")
    assert [r["n_fail"] for r in table] == ["0", "0"]
    assert main(["mc-study", "--config", str(tmp_path / "nope.cfg")]) == 1
