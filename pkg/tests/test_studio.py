import csv
import os

import numpy as np
import pytest

from dppfit.errors import ConfigError, NormalityUndefined, StudyAborted, ValidationError
from dppfit.geometry import Window
from dppfit.kernels import KernelModel
from dppfit.studio import (
    CellResult,
    StudyConfig,
    StudyResult,
    normality_report,
    parse_config,
    resolve_threads,
    run_study,
    write_normality,
    write_study,
)

SMALL = """
# tiny study
model.family = gaussian
model.rho = 100
model.alpha = 0.03
study.window_sides = 1
study.replicates = 3
study.master_seed = 7
"""


@pytest.fixture(scope="module")
def small_result():
    return run_study(parse_config(SMALL), threads=1)


def test_parse_config_defaults():
    cfg = parse_config(SMALL)
    assert cfg.model.rho == 100 and cfg.model.theta == (0.03,)
    assert cfg.windows == (Window.cube(1.0),)
    assert cfg.methods == ("K", "g")
    assert cfg.k_correction == "isotropic"
    assert cfg.master_seed == 7 and cfg.replicates == 3


def test_parse_config_all_keys():
    text = SMALL.replace("study.window_sides = 1", "") + """
study.windows = 0 1 0 1; 0 2 0 2
study.methods = g
study.threads = 2
study.hist_bins = 5
estimator.kernel = box
estimator.bandwidth_constant = 0.2
estimator.k_correction = translate
sampler.trunc_mass = 0.9999
sampler.max_modes = 512
contrast.r_min = 0.02
contrast.c = 0.25
contrast.grid_points = 257
"""
    cfg = parse_config(text)
    assert cfg.windows == (Window.cube(1.0), Window.cube(2.0))
    assert cfg.methods == ("g",)
    assert (cfg.threads, cfg.hist_bins, cfg.kernel) == (2, 5, "box")
    assert cfg.bandwidth_constant == 0.2 and cfg.k_correction == "translate"
    assert cfg.trunc_mass == 0.9999 and cfg.max_modes == 512
    spec = cfg.spec_for(cfg.windows[1], "g")
    assert (spec.r_min, spec.r_max, spec.c, spec.grid_points) == (0.02, 0.5, 0.25, 257)


@pytest.mark.parametrize(
    "extra, match",
    [
        ("bogus.key = 1", "unknown configuration keys"),
        ("study.replicates = three", "cannot parse"),
        ("study.replicates = 0", "replicates"),
        ("study.methods = K, h", "methods"),
        ("estimator.k_correction = ripley", "k_correction"),
        ("study.threads = 0", "threads"),
        ("no equals sign", "expected key=value"),
        ("study.windows = 0 1 0 1", "not both"),
        ("contrast.c = 1.5\ncontrast.r_min = 0", "contrast settings"),
    ],
)
def test_parse_config_errors(extra, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(SMALL + extra + "\n")


def test_parse_config_missing_keys():
    with pytest.raises(ConfigError, match="model.rho"):
        parse_config("model.alpha = 0.03\nstudy.replicates = 1\n")
    with pytest.raises(ConfigError, match="model.alpha"):
        parse_config("model.rho = 100\nstudy.replicates = 1\n")
    with pytest.raises(ConfigError, match="study.replicates"):
        parse_config("model.rho = 100\nmodel.alpha = 0.03\n")


def test_config_rejects_invalid_model():
    with pytest.raises(ValidationError):
        parse_config(SMALL.replace("0.03", "0.06"))


def test_isotropic_needs_low_dimension():
    m = KernelModel.gaussian(100.0, 0.03, dim=3)
    with pytest.raises(ConfigError, match="isotropic"):
        StudyConfig(m, (Window.cube(1.0, 3),), 1)
    StudyConfig(m, (Window.cube(1.0, 3),), 1, k_correction="translate")


def test_window_dimension_must_match(gauss):
    with pytest.raises(ConfigError, match="dimension"):
        StudyConfig(gauss, (Window.cube(1.0, 1),), 1)


def test_threads_env(monkeypatch):
    cfg = parse_config(SMALL + "study.threads = 3\n")
    monkeypatch.delenv("DPPFIT_THREADS", raising=False)
    assert resolve_threads(cfg) == 3
    monkeypatch.setenv("DPPFIT_THREADS", "5")
    assert resolve_threads(cfg) == 5
    for bad in ("0", "x"):
        monkeypatch.setenv("DPPFIT_THREADS", bad)
        with pytest.raises(ConfigError):
            resolve_threads(cfg)


def test_mse_decomposition(small_result):
    assert len(small_result.cells) == 2
    for c in small_result.cells:
        assert c.n_fit + c.n_fail == 3
        assert c.n_fail == 0
        np.testing.assert_allclose(c.mse, c.bias**2 + c.var, rtol=0, atol=1e-12)
        assert np.all(c.var >= 0)


def test_single_replicate_has_zero_variance():
    res = run_study(parse_config(SMALL.replace("replicates = 3", "replicates = 1")), threads=1)
    for c in res.cells:
        assert c.var[0] == 0.0
        assert c.mse[0] == pytest.approx((c.estimates[0, 0] - 0.03) ** 2, abs=1e-18)


def test_study_is_deterministic(small_result):
    again = run_study(parse_config(SMALL), threads=2)
    for a, b in zip(small_result.cells, again.cells):
        np.testing.assert_array_equal(a.estimates, b.estimates)


def test_methods_share_patterns():
    # a method's estimates do not depend on which other methods run
    only_g = run_study(parse_config(SMALL + "study.methods = g\n"), threads=1)
    both = run_study(parse_config(SMALL), threads=1)
    np.testing.assert_array_equal(only_g.cell(0, "g").estimates, both.cell(0, "g").estimates)


def test_study_aborts_on_failures():
    cfg = parse_config(SMALL + "sampler.max_modes = 2\n")
    with pytest.raises(StudyAborted, match="3 of 3 replicates failed"):
        run_study(cfg, threads=1)


def test_write_study(small_result, tmp_path):
    paths = write_study(small_result, tmp_path)
    with open(paths["table"]) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["window", "method", "alpha_true", "mse", "bias", "var", "n_fail"]
    assert [r["method"] for r in rows] == ["K", "g"]
    for r, c in zip(rows, small_result.cells):
        assert float(r["mse"]) == c.mse[0] and int(r["n_fail"]) == 0
    with open(paths["estimates"]) as fh:
        est = list(csv.DictReader(fh))
    assert len(est) == 6
    assert list(est[0]) == ["window", "method", "replicate", "alpha", "error"]
    with open(paths["hist"]) as fh:
        hist = list(csv.DictReader(fh))
    assert list(hist[0]) == ["window", "method", "bin_lo", "bin_hi", "count"]
    assert sum(int(h["count"]) for h in hist if h["method"] == "g") == 3
    assert sorted(os.listdir(tmp_path)) == ["estimates.csv", "hist.csv", "table.csv"]


def _fake_result(estimates, method="g"):
    cfg = parse_config(SMALL)
    est = np.asarray(estimates, dtype=float).reshape(-1, 1)
    cell = CellResult(cfg.windows[0], method, np.array([0.03]), est, ("",) * len(est))
    return StudyResult(cfg, (cell,))


def test_normality_report_gaussian(rng, tmp_path):
    res = _fake_result(0.03 + 0.002 * rng.standard_normal(400))
    (row,) = normality_report(res, model=False)
    assert row.n == 400 and not row.rejected_1pct
    assert row.empirical_var == pytest.approx(4e-6, rel=0.2)
    assert np.isnan(row.theoretical_var)
    assert row.hist_counts.sum() == 400
    path = tmp_path / "normality.csv"
    write_normality([row], path)
    with open(path) as fh:
        (rec,) = list(csv.DictReader(fh))
    assert rec["rejected_1pct"] == "0" and rec["theoretical_var"] == ""


def test_normality_report_rejects_skewed(rng):
    res = _fake_result(0.03 + 0.002 * rng.exponential(size=400))
    (row,) = normality_report(res, model=False)
    assert row.rejected_1pct


def test_normality_report_errors():
    with pytest.raises(NormalityUndefined):
        normality_report(_fake_result([0.03] * 150), model=False)
    with pytest.raises(ValueError, match=">= 100"):
        normality_report(_fake_result(np.linspace(0.02, 0.04, 50)), model=False)
