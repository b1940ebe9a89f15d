import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kpzpaths.env import (
    Environment,
    Exponential,
    InverseGamma,
    RngStream,
    couple_boundary,
    couple_uniforms,
    digamma,
    exp_quantile,
    invgamma_quantile,
    open_uniform,
    replica_stream,
    sample_environment,
    trigamma,
)
from kpzpaths.errors import DimensionError, DomainError


# ---------------------------------------------------------------- quantiles


@pytest.mark.parametrize("shape", [0.3, 0.5, 1.0, 2.0, 6.5])
@pytest.mark.parametrize("u", [1e-10, 1e-4, 0.2, 0.5, 0.8, 1 - 1e-4, 1 - 1e-10])
def test_invgamma_quantile_matches_high_precision(shape, u):
    with mpmath.workdps(40):
        # solve in log y for robustness near the tails
        f = lambda ly: mpmath.gammainc(shape, mpmath.e**ly, mpmath.inf, regularized=True) - u
        ly = mpmath.findroot(f, mpmath.log(1 / invgamma_quantile(u, shape)))
        want = float(mpmath.e ** (-ly))
    assert invgamma_quantile(u, shape) == pytest.approx(want, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(1e-12, 1 - 1e-12), shape=st.floats(0.2, 20.0))
def test_invgamma_quantile_inverts_cdf(u, shape):
    x = invgamma_quantile(u, shape)
    assert x > 0
    assert InverseGamma(shape).cdf(x) == pytest.approx(u, rel=1e-9, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(1e-6, 1 - 1e-6), b=st.floats(1e-6, 1 - 1e-6), shape=st.floats(0.25, 8.0))
def test_invgamma_quantile_is_monotone(a, b, shape):
    lo, hi = sorted((a, b))
    assert invgamma_quantile(lo, shape) <= invgamma_quantile(hi, shape)


def test_invgamma_closed_forms_agree_with_general_route():
    u = np.linspace(0.01, 0.99, 99)
    assert np.allclose(invgamma_quantile(u, 1.0), -1.0 / np.log(u), rtol=1e-15)
    from scipy.special import gammainccinv

    assert np.allclose(invgamma_quantile(u, 0.5), 1.0 / gammainccinv(0.5, u), rtol=1e-12)


def test_quantile_rejects_closed_interval_ends():
    with pytest.raises(DomainError):
        invgamma_quantile(0.0, 1.0)
    with pytest.raises(DomainError):
        invgamma_quantile(1.0, 1.0)
    with pytest.raises(DomainError):
        exp_quantile(1.0)


def test_exp_quantile():
    assert exp_quantile(1.0 - math.exp(-1.0), 0.5) == pytest.approx(2.0)
    assert exp_quantile(0.2) < exp_quantile(0.7)


# ---------------------------------------------------------------- digamma / trigamma


@pytest.mark.parametrize("x", [1e-3, 0.1, 0.5, 1.0, 1.5, 3.0, 7.9, 8.0, 25.0, 400.0])
def test_polygamma_against_mpmath(x):
    assert float(digamma(x)) == pytest.approx(float(mpmath.digamma(x)), rel=1e-13)
    assert float(trigamma(x)) == pytest.approx(float(mpmath.polygamma(1, x)), rel=1e-13)


def test_digamma_half():
    assert float(-digamma(0.5)) == pytest.approx(1.9635100260214235, rel=1e-15)


def test_polygamma_domain():
    with pytest.raises(DomainError):
        digamma(0.0)
    with pytest.raises(DomainError):
        trigamma(-1.0)


# ---------------------------------------------------------------- streams


def test_stream_is_pure_function_of_its_fields():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    d = RngStream(8, 3).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_advanced_stream_skips_blocks():
    g = RngStream(1, 2).generator()
    full = g.integers(0, 2**64, size=8, dtype=np.uint64, endpoint=False)
    # one Philox block yields four 64-bit words
    tail = RngStream(1, 2).advanced(1).generator().integers(0, 2**64, size=4, dtype=np.uint64)
    assert np.array_equal(full[4:8], tail)


def test_replica_streams_are_distinct():
    ids = {replica_stream(1, t, i).stream_id for t in range(3) for i in range(100)}
    assert len(ids) == 300
    with pytest.raises(DomainError):
        replica_stream(1, 1 << 24, 0)


def test_open_uniform_never_hits_ends():
    u = open_uniform(np.random.Generator(np.random.Philox(0)), 200_000)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 0.001


# ---------------------------------------------------------------- environments


def test_environment_is_read_only_and_validated():
    env = sample_environment(4, 3, Exponential(1.0), RngStream(1))
    assert env.weights.shape == (3, 4)
    with pytest.raises(ValueError):
        env.weights[0, 0] = 1.0
    with pytest.raises(DimensionError):
        sample_environment(0, 3, Exponential(1.0), RngStream(1))
    with pytest.raises(DomainError):
        Environment(np.array([[1.0, -1.0]]), Exponential(1.0))


def test_environment_same_seed_same_weights():
    a = sample_environment(10, 10, InverseGamma(1.0), RngStream(5, 1))
    b = sample_environment(10, 10, InverseGamma(1.0), RngStream(5, 1))
    assert np.array_equal(a.weights, b.weights)


def test_environment_coordinates_and_half_turn():
    env = Environment(np.arange(1.0, 13.0).reshape(3, 4), Exponential(1.0), origin_offset=(2, -1))
    assert env.x_range == (2, 5) and env.y_range == (-1, 1)
    assert env.weight((2, -1)) == 1.0 and env.weight((5, 1)) == 12.0
    rot = env.rotated_half_turn()
    for x in range(2, 6):
        for y in range(-1, 2):
            assert rot.weight((-x, -y)) == env.weight((x, y))


@pytest.mark.parametrize("dist,law", [(Exponential(2.0), stats.expon(scale=0.5)), (InverseGamma(1.5), stats.invgamma(1.5))])
def test_sampled_marginals(dist, law):
    env = sample_environment(200, 100, dist, RngStream(11))
    assert stats.kstest(env.weights.ravel(), law.cdf).pvalue > 0.001
    assert dist.mean() == pytest.approx(law.mean())


def test_coupled_boundary_is_sitewise_monotone():
    row = couple_boundary(5000, [0.4, 0.5, 0.6], RngStream(3))
    assert np.all(row[0.4] >= row[0.5]) and np.all(row[0.5] >= row[0.6])
    assert stats.kstest(row[0.4], stats.invgamma(0.4).cdf).pvalue > 0.001
    u = np.array([0.3, 0.7])
    c = couple_uniforms(u, [1.0])
    assert np.allclose(c[1.0], -1.0 / np.log(u))
