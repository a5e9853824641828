import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppfit.errors import EmptyErosion, ZeroIntensity
from dppfit.estimators import (
    BOX,
    EPANECHNIKOV,
    BandwidthRule,
    SmoothingKernel,
    K_hat,
    bandwidth,
    default_grid,
    g_hat,
    intensity_hat,
    isotropic_fraction,
    pair_count_statistic,
    summary_hat,
)
from dppfit.geometry import PointPattern, Window
from dppfit.moments import g_theory
from dppfit.sampler import SamplerConfig, derive_seed, sample_dpp, sample_poisson

CORRECTIONS = ("border", "translate", "isotropic")


def _pattern(n, w, seed):
    rng = np.random.default_rng(seed)
    return PointPattern(w, np.asarray(w.lo) + rng.random((n, w.dim)) * w.sides)


def test_intensity_examples(unit_square):
    assert intensity_hat(_pattern(100, unit_square, 0)) == 100.0
    assert intensity_hat(PointPattern(unit_square, np.zeros((0, 2)))) == 0.0
    assert intensity_hat(_pattern(50, Window((0, 0), (2, 1)), 0)) == 25.0


def test_smoothing_kernels_integrate_to_one():
    u = np.linspace(-3, 3, 600_001)
    for k in (EPANECHNIKOV, BOX, SmoothingKernel("epanechnikov", 2.0), SmoothingKernel("box", 0.5)):
        v = k(u)
        assert np.all(v >= 0)
        np.testing.assert_allclose(v, k(-u))
        assert np.trapezoid(v, u) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        SmoothingKernel("gaussian")
    with pytest.raises(ValueError):
        SmoothingKernel(support=0.0)


def test_bandwidth_examples(unit_square):
    p = _pattern(100, unit_square, 1)
    assert bandwidth(BandwidthRule(), p) == pytest.approx(0.015)
    assert bandwidth(BandwidthRule.fixed(0.02), p) == 0.02
    q = _pattern(400, unit_square, 1)
    assert bandwidth(BandwidthRule(), q) == pytest.approx(bandwidth(BandwidthRule(), p) / 2)
    with pytest.raises(ZeroIntensity):
        bandwidth(BandwidthRule(), PointPattern(unit_square, np.zeros((0, 2))))
    with pytest.raises(ValueError):
        BandwidthRule("fixed")
    with pytest.raises(ValueError):
        BandwidthRule("silverman")


def test_K_hat_hand_example(unit_square):
    p = PointPattern(unit_square, [[0.45, 0.5], [0.55, 0.5]])
    assert K_hat(p, [0.2]).values[0] == pytest.approx(0.25 * 2 / 0.36, rel=1e-14)
    assert K_hat(p, [0.2]).values[0] == pytest.approx(1.3889, abs=1e-4)
    assert K_hat(p, [0.05]).values[0] == 0.0
    assert K_hat(p, [0.05, 0.2]).estimator == "border"


def test_K_hat_errors(unit_square):
    p = _pattern(10, unit_square, 2)
    with pytest.raises(EmptyErosion):
        K_hat(p, [0.1, 0.5])
    with pytest.raises(ZeroIntensity):
        K_hat(PointPattern(unit_square, np.zeros((0, 2))), [0.1])
    with pytest.raises(ValueError):
        K_hat(p, [0.2, 0.1])
    with pytest.raises(ValueError):
        K_hat(p, [0.1], correction="ripley")
    with pytest.raises(ValueError):
        K_hat(p, [0.1, 0.6], correction="isotropic")
    with pytest.raises(ValueError):
        K_hat(_pattern(10, Window.cube(1.0, dim=3), 0), [0.1], correction="isotropic")


def test_translate_and_isotropic_hand_example(unit_square):
    p = PointPattern(unit_square, [[0.45, 0.5], [0.55, 0.5]])
    # translation: 2 ordered pairs weighted by 1 / |D cap D_z| with z = (0.1, 0)
    assert K_hat(p, [0.2], "translate").values[0] == pytest.approx(2 / 0.9 / 4, rel=1e-14)
    # isotropic: both circles of radius 0.1 lie inside the window
    assert K_hat(p, [0.2], "isotropic").values[0] == pytest.approx(2 / 4, rel=1e-14)


def test_isotropic_fraction_cases(unit_square):
    cases = [
        ((0.5, 0.5), 0.1, 1.0),
        ((0.0, 0.5), 0.1, 0.5),
        ((0.0, 0.0), 0.1, 0.25),
        ((0.05, 0.5), 0.1, 2 / 3),
        ((0.05, 0.05), 0.1, 5 / 12),
    ]
    for x, r, expect in cases:
        assert isotropic_fraction(x, np.array([r]), unit_square)[0] == pytest.approx(expect, rel=1e-12)
    w1 = Window((0.0,), (1.0,))
    np.testing.assert_allclose(
        isotropic_fraction([[0.5], [0.05], [0.0]], np.array([0.1, 0.1, 0.1]), w1), [1.0, 0.5, 0.5]
    )


@settings(max_examples=60, deadline=None)
@given(
    x=st.floats(0, 1), y=st.floats(0, 2), r=st.floats(1e-3, 0.5)
)
def test_isotropic_fraction_vs_angle_grid(x, y, r):
    w = Window((0, 0), (1, 2))
    phi = (np.arange(200_000) + 0.5) * 2 * np.pi / 200_000
    ring = np.stack([x + r * np.cos(phi), y + r * np.sin(phi)], axis=1)
    oracle = w.contains(ring).mean()
    assert isotropic_fraction((x, y), np.array([r]), w)[0] == pytest.approx(oracle, abs=2e-5)


def test_g_hat_single_point(unit_square):
    p = PointPattern(unit_square, [[0.5, 0.5]])
    g = g_hat(p, default_grid(0.01, 0.25))
    assert np.all(g.values == 0)
    assert g.bandwidth == pytest.approx(0.15)
    with pytest.raises(ValueError):
        g_hat(p, [0.0, 0.1])


def test_g_hat_counts_zero_overlap_pairs(unit_square):
    p = PointPattern(unit_square, [[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
    g = g_hat(p, [1.35, 1.45], bw=BandwidthRule.fixed(0.1))
    assert g.meta["n_zero_overlap"] == 2
    assert np.all(np.isfinite(g.values))


def test_summary_hat_dispatch(unit_square):
    p = _pattern(50, unit_square, 3)
    t = default_grid(0.01, 0.25, 33)
    np.testing.assert_array_equal(summary_hat(p, "K", t).values, K_hat(p, t).values)
    np.testing.assert_array_equal(
        summary_hat(p, "K", t, correction="translate").values, K_hat(p, t, "translate").values
    )
    np.testing.assert_array_equal(summary_hat(p, "g", t).values, g_hat(p, t).values)
    with pytest.raises(ValueError):
        summary_hat(p, "L", t)


def test_g_hat_integrates_to_translate_pair_counts():
    w = Window.cube(1.0)
    p = _pattern(120, w, 11)
    a, b = 0.05, 0.2
    t = np.linspace(a, b, 30_001)
    for kernel, tol in ((EPANECHNIKOV, 2e-3), (BOX, 1e-2)):
        g = g_hat(p, t, kernel, BandwidthRule.fixed(2e-3))
        rho = intensity_hat(p)
        lhs = np.trapezoid(2 * np.pi * t * rho**2 * g.values, t)
        K = K_hat(p, [a, b], "translate").values * rho**2
        assert lhs == pytest.approx(K[1] - K[0], rel=tol)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 10_000), corr=st.sampled_from(CORRECTIONS))
def test_K_hat_nonnegative(n, seed, corr):
    p = _pattern(n, Window((0, 0), (1.0, 1.5)), seed)
    assert np.all(K_hat(p, default_grid(0.0, 0.25, 65), corr).values >= 0)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 10_000), corr=st.sampled_from(CORRECTIONS[1:]))
def test_weighted_K_hat_nondecreasing(n, seed, corr):
    p = _pattern(n, Window((0, 0), (1.0, 1.5)), seed)
    assert np.all(np.diff(K_hat(p, default_grid(0.0, 0.25, 65), corr).values) >= 0)


def test_border_K_hat_can_decrease(unit_square):
    # the pair is counted for d <= t <= b and leaves the eroded window beyond b
    p = PointPattern(unit_square, [[0.1, 0.5], [0.15, 0.5]])
    K = K_hat(p, [0.06, 0.12, 0.16]).values
    assert K[0] > 0 and K[1] > 0 and K[2] == 0


@settings(max_examples=20, deadline=None)
@given(
    n=st.integers(2, 60),
    seed=st.integers(0, 10_000),
    shift=st.tuples(st.integers(-50, 50), st.integers(-50, 50)),
)
def test_translation_and_relabelling_invariance(n, seed, shift):
    w = Window.cube(1.0)
    p = _pattern(n, w, seed)
    # dyadic shifts keep coordinates exact, so results must agree to rounding
    s = np.array(shift) / 8.0
    q = p.translate(s)
    perm = np.random.default_rng(seed).permutation(n)
    r = PointPattern(w, p.points[perm])
    t = default_grid(0.01, 0.25, 65)
    for est in (
        lambda x: g_hat(x, t).values,
        lambda x: K_hat(x, t).values,
        lambda x: K_hat(x, t, "translate").values,
        lambda x: K_hat(x, t, "isotropic").values,
    ):
        base = est(p)
        assert np.all(base >= 0)
        np.testing.assert_allclose(est(q), base, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(est(r), base, rtol=1e-12, atol=1e-12)


def test_poisson_unbiasedness_all_corrections():
    w = Window.cube(2.0)
    t = np.array([0.05, 0.1, 0.2])
    vals = {c: [] for c in CORRECTIONS}
    khat = []
    for s in range(500):
        p = sample_poisson(100, w, seed=derive_seed(17, s))
        rho2 = intensity_hat(p) ** 2
        for c in CORRECTIONS:
            K = K_hat(p, t, c).values
            vals[c].append(K * rho2)
        khat.append(K_hat(p, [0.1]).values[0])
    target = 1e4 * np.pi * t**2
    for c in CORRECTIONS:
        v = np.array(vals[c])
        se = v.std(axis=0, ddof=1) / np.sqrt(len(v))
        assert np.all(np.abs(v.mean(axis=0) - target) <= 3 * se), c
    khat = np.array(khat)
    assert abs(khat.mean() - np.pi * 0.01) <= 3 * khat.std(ddof=1) / np.sqrt(len(khat))
    np.testing.assert_allclose(
        pair_count_statistic(p, t), K_hat(p, t).values * intensity_hat(p) ** 2, rtol=1e-14
    )


def test_g_hat_poisson_mean():
    w = Window.cube(2.0)
    g = np.array([g_hat(sample_poisson(100, w, seed=derive_seed(23, s)), [0.1]).values[0] for s in range(500)])
    assert abs(g.mean() - 1.0) <= 3 * g.std(ddof=1) / np.sqrt(len(g))


@pytest.mark.slow
def test_g_hat_dpp_mean(gauss):
    w = Window.cube(2.0)
    g = np.array(
        [g_hat(sample_dpp(gauss, w, SamplerConfig(seed=derive_seed(29, s))), [0.03]).values[0] for s in range(500)]
    )
    expect = g_theory(gauss, 0.03)
    assert abs(g.mean() - expect) <= 3 * g.std(ddof=1) / np.sqrt(len(g)) + 0.02
