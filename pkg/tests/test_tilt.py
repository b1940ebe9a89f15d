import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from kpzpaths import tilt
from kpzpaths.busemann import exact_coupled_pair
from kpzpaths.env import RngStream, trigamma
from kpzpaths.errors import CoverageError, DomainError, ParameterRangeError
from kpzpaths.lattice import BoundaryRow

SPEC = tilt.tilt_parameters(0.01, 1.0, 1000, 2000)


def test_worked_parameters():
    assert SPEC.lam == pytest.approx(0.501, rel=1e-12)
    assert SPEC.eta == pytest.approx(0.49, rel=1e-12)
    assert SPEC.interval_A == (1002, 1100)
    assert SPEC.size_A == 99
    # the raw B interval starts at 1011 and is moved past A
    assert SPEC.b_clipped and SPEC.interval_B == (1101, 2000)
    assert SPEC.d1_interval == (1, 100)
    assert SPEC.d2_threshold == 10


def test_parameter_rejections():
    with pytest.raises(DomainError):
        tilt.tilt_parameters(0.05, 1.0, 10, 40)
    with pytest.raises(DomainError):
        tilt.tilt_parameters(0.01, 0.5, 10, 40)
    with pytest.raises(DomainError):
        tilt.tilt_parameters(0.01, 1.0, 30, 40)
    with pytest.raises(ParameterRangeError):
        tilt.tilt_parameters(0.04, 5.0, 1, 4)


def long_row(values, spec):
    # row anchored at relative 0; edges cover relative columns 1..len
    return BoundaryRow(0, 1, np.asarray(values, dtype=float), 0)


def test_lpp_tilt_rescales_only_the_two_intervals(rng):
    row = long_row(rng.exponential(2.0, size=1200), SPEC)
    tb = tilt.tilt_boundary("lpp", row, SPEC)
    ratio = tb.tilted.values / row.values
    a0, a1 = SPEC.relative(SPEC.interval_A)
    b0, b1 = SPEC.relative(SPEC.interval_B)
    assert np.allclose(ratio[a0 - 1 : a1], 0.5 / SPEC.lam)
    assert np.allclose(ratio[b0 - 1 : b1], 0.5 / SPEC.eta)
    assert np.all(ratio[: a0 - 1] == 1.0) and np.all(ratio[b1:] == 1.0)


def test_tilted_lpp_marginal_on_A():
    spec = tilt.tilt_parameters(0.04, 2.0, 8, 64)
    sa = slice(spec.interval_A[0] - spec.r - 1, spec.interval_A[1] - spec.r)
    vals = []
    for i in range(3000):
        row = long_row(np.random.default_rng(i).exponential(2.0, size=600), spec)
        vals.append(tilt.tilt_boundary("lpp", row, spec).tilted.values[sa])
    assert stats.kstest(np.concatenate(vals), stats.expon(scale=1 / spec.lam).cdf).pvalue > 0.001


def test_polymer_tilt_keeps_sitewise_order_and_law():
    spec = tilt.tilt_parameters(0.04, 2.0, 8, 64)
    sa = slice(spec.interval_A[0] - spec.r - 1, spec.interval_A[1] - spec.r)
    sb = slice(spec.interval_B[0] - spec.r - 1, spec.interval_B[1] - spec.r)
    tilted_a = []
    for i in range(1000):
        pair = exact_coupled_pair("polymer", 0.5, 601, 1, 1, RngStream(30, i), x_offset=0)
        tb = tilt.tilt_boundary("polymer", pair.boundary, spec, pair.uniforms)
        assert np.all(tb.tilted.values[sa] <= pair.boundary.values[sa])
        assert np.all(tb.tilted.values[sb] >= pair.boundary.values[sb])
        tilted_a.append(tb.tilted.values[sa])
    assert stats.kstest(np.concatenate(tilted_a), stats.invgamma(spec.lam).cdf).pvalue > 0.001
    with pytest.raises(DomainError):
        tilt.tilt_boundary("polymer", pair.boundary, spec)


def test_identity_tilt(rng):
    ident = replace(SPEC, lam=0.5, eta=0.5)
    row = long_row(rng.exponential(2.0, size=1200), SPEC)
    assert np.array_equal(tilt.tilt_boundary("lpp", row, ident).tilted.values, row.values)
    assert tilt.rn_derivative_exp(row, ident) == 1.0
    assert tilt.rn_derivative_invgamma(row, ident) == 1.0
    assert tilt.rn_second_moment_closed_form(ident) == 1.0


def test_density_matches_scipy_ratio(rng):
    spec = tilt.tilt_parameters(0.04, 2.0, 8, 64)
    row = long_row(rng.exponential(2.0, size=600), spec)
    sa, sb = tilt._rel_slices(row, spec)
    x = row.values
    want = np.sum(stats.expon(scale=1 / spec.lam).logpdf(x[sa]) - stats.expon(scale=2).logpdf(x[sa]))
    want += np.sum(stats.expon(scale=1 / spec.eta).logpdf(x[sb]) - stats.expon(scale=2).logpdf(x[sb]))
    assert math.log(tilt.rn_derivative_exp(row, spec)) == pytest.approx(want, rel=1e-10)
    y = 1.0 / rng.gamma(0.5, size=600)
    prow = long_row(y, spec)
    want = np.sum(stats.invgamma(spec.lam).logpdf(y[sa]) - stats.invgamma(0.5).logpdf(y[sa]))
    want += np.sum(stats.invgamma(spec.eta).logpdf(y[sb]) - stats.invgamma(0.5).logpdf(y[sb]))
    assert math.log(tilt.rn_derivative_invgamma(prow, spec)) == pytest.approx(want, rel=1e-10)


def test_exponential_second_moment_worked_value():
    only_a = replace(SPEC, interval_B=(1, 0))
    per_site = 0.501**2 / (0.5 * 0.502)
    assert tilt.rn_second_moment_closed_form(only_a) == pytest.approx(per_site**99, rel=1e-14)
    assert per_site**99 == pytest.approx(1.000394, abs=1e-6)


@pytest.mark.parametrize("s", [0.3, 0.45, 0.5, 0.55, 0.65])
def test_invgamma_second_moment_by_quadrature(s):
    g, h = stats.invgamma(s), stats.invgamma(0.5)
    # integrate g^2 / h in log x so both tails are resolved
    f = lambda lx: math.exp(2 * g.logpdf(math.exp(lx)) - h.logpdf(math.exp(lx)) + lx)
    want, _ = integrate.quad(f, -200, 200, points=[0.0], limit=1000)
    one = replace(SPEC, lam=s, interval_A=(1001, 1001), interval_B=(1, 0))
    assert tilt.rn_second_moment_invgamma(one) == pytest.approx(want, rel=1e-8)


def test_log_second_moment_is_quadratic_in_the_tilt():
    # log E f^2 per site is about C (s - 1/2)^2 with C = 4 (exponential) or psi1(1/2) (inverse gamma)
    for n in (10**4, 10**5, 10**6):
        spec = tilt.tilt_parameters(0.01, 1.0, n // 2, n)
        d2 = spec.size_A * (spec.lam - 0.5) ** 2 + spec.size_B * (spec.eta - 0.5) ** 2
        c_exp = math.log(tilt.rn_second_moment_closed_form(spec)) / d2
        c_ig = math.log(tilt.rn_second_moment_invgamma(spec)) / d2
        assert c_exp == pytest.approx(4.0, rel=0.05)
        assert c_ig == pytest.approx(float(trigamma(0.5)), rel=0.05)


@pytest.mark.parametrize("model", ["lpp", "polymer"])
def test_monte_carlo_density_is_normalised(model):
    rep = tilt.rn_monte_carlo(model, SPEC, 20000, seed=3)
    assert abs(rep.mean_f - 1.0) < 4 * rep.se_f
    assert abs(rep.mean_f2 - rep.closed_form_f2) < 4 * rep.se_f2
    again = tilt.rn_monte_carlo(model, SPEC, 20000, seed=3)
    assert np.array_equal(rep.values, again.values)


def test_short_row_is_a_coverage_error():
    row = long_row(np.ones(50), SPEC)
    with pytest.raises(CoverageError):
        tilt.rn_derivative_exp(row, SPEC)


@pytest.mark.parametrize("model", ["lpp", "polymer"])
def test_small_event_run_is_consistent(model):
    spec = tilt.tilt_parameters(0.01, 1.0, 32, 64)
    rep = tilt.event_D_experiment(model, spec, 6, seed=2)
    c = rep.counts
    assert c["D"] <= min(c["D1"], c["D2"]) and c["D_tilted"] <= min(c["D1_tilted"], c["D2_tilted"])
    assert all(x.f > 0 for x in rep.raw)
    lo, hi = rep.interval("D1")
    assert 0.0 <= lo <= rep.frequency("D1") <= hi <= 1.0
    again = tilt.event_D_experiment(model, spec, 6, seed=2)
    assert again.counts == rep.counts and again.mean_f2 == rep.mean_f2
    with pytest.raises(DomainError):
        tilt.event_D_experiment(model, spec, 1, seed=2, mass_threshold=0.0)


def test_log_second_moment_grows_linearly_in_interval_size():
    sizes = np.array([5, 10, 20, 40])
    logs = []
    for k in sizes:
        spec = replace(SPEC, lam=0.56, interval_A=(1001, 1000 + int(k)), interval_B=(1, 0))
        logs.append(math.log(tilt.rn_monte_carlo("polymer", spec, 100_000, seed=11).mean_f2))
    fit = stats.linregress(sizes, logs)
    assert fit.rvalue**2 > 0.99
