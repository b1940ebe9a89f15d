import math

import numpy as np
import pytest

from kpzpaths.errors import DomainError, InsufficientDataError
from kpzpaths.stats import TailCurve, chi_square_test, fit_power_law, ks_test, loglog_slope, mean_and_se, wilson_interval

T = np.array([0.6, 0.8, 1.0, 1.2, 1.4, 1.6])


def test_wilson_known_values():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038315, abs=1e-6)
    assert hi == pytest.approx(0.5961685, abs=1e-6)
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and hi == pytest.approx(0.1611252, abs=1e-6)
    assert wilson_interval(20, 20)[1] == 1.0
    with pytest.raises(DomainError):
        wilson_interval(5, 4)


def test_wilson_width_shrinks_like_root_n():
    w1 = np.diff(wilson_interval(300, 1000))[0]
    w2 = np.diff(wilson_interval(600, 2000))[0]
    assert w2 / w1 == pytest.approx(1 / math.sqrt(2), rel=0.1)


def test_fit_recovers_exact_power_laws():
    curve = TailCurve.from_counts(T, np.exp(-2 * T**3) * 1e6, np.full(T.size, 1e6))
    fit = fit_power_law(curve)
    assert fit.slope == pytest.approx(3.0, abs=1e-9)
    assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    curve = TailCurve.from_counts(T, np.exp(-T) * 1e6, np.full(T.size, 1e6))
    assert fit_power_law(curve).slope == pytest.approx(1.0, abs=1e-9)


def test_fit_needs_three_usable_points():
    curve = TailCurve.from_counts(T, [500, 400, 0, 0, 0, 0], np.full(T.size, 1000))
    with pytest.raises(InsufficientDataError):
        fit_power_law(curve)
    few = TailCurve.from_counts(T, [5, 4, 3, 2, 1, 1], np.full(T.size, 10))
    with pytest.raises(InsufficientDataError):
        fit_power_law(few)


def test_fit_interval_covers_the_true_slope():
    rng = np.random.default_rng(77)
    p = np.exp(-0.5 * T**3)
    hits = 0
    for _ in range(400):
        curve = TailCurve.from_counts(T, rng.binomial(100_000, p), np.full(T.size, 100_000))
        lo, hi = fit_power_law(curve).ci
        hits += lo <= 3.0 <= hi
    assert hits / 400 >= 0.9


def test_monotonicity_flag():
    n = np.full(4, 10_000)
    ok = TailCurve.from_counts(T[:4], [5000, 4000, 4010, 1000], n)
    assert ok.monotone
    bad = TailCurve.from_counts(T[:4], [5000, 4000, 6000, 1000], n)
    assert bad.monotonicity_violations() == [1]
    means = TailCurve.from_means(T[:3], [0.5, 0.6, 0.1], [0.01, 0.01, 0.01], 1000)
    assert means.monotonicity_violations() == [0]


def test_curve_rejects_ragged_input():
    with pytest.raises(DomainError):
        TailCurve(T, T[:3], T, T)


def test_small_helpers():
    m, se = mean_and_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    with pytest.raises(InsufficientDataError):
        mean_and_se([1.0])
    assert loglog_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
    rng = np.random.default_rng(1)
    assert ks_test(rng.random(2000), lambda x: np.clip(x, 0, 1))[1] > 0.001
    assert chi_square_test([10, 10], [10, 10])[1] == pytest.approx(1.0)
