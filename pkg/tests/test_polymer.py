import math

import numpy as np
import pytest
from scipy import stats

from conftest import mp_logz, path_weight_product, paths, row_potential
from kpzpaths import polymer
from kpzpaths.env import Environment, InverseGamma, RngStream, sample_environment
from kpzpaths.errors import DomainError, WindowTooSmallError
from kpzpaths.lattice import BoundaryRow, GeodesicPath, Side

IG1 = InverseGamma(1.0)


def env_of(w, origin=(0, 0)):
    return Environment(np.asarray(w, dtype=float), IG1, origin_offset=origin)


def test_two_by_two_example():
    env = env_of([[1.0, 2.0], [3.0, 4.0]])
    assert polymer.log_partition(env, (0, 0), (1, 1)) == pytest.approx(math.log(20.0), rel=1e-15)


def test_log_partition_matches_high_precision(rng):
    for _ in range(40):
        h, w = rng.integers(1, 7, size=2)
        weights = 1.0 / rng.standard_exponential((h, w))
        env = env_of(weights)
        got = polymer.log_partition(env, (0, 0), (w - 1, h - 1))
        assert got == pytest.approx(mp_logz(weights), rel=1e-12, abs=1e-12)


def test_log_partition_survives_extreme_weights(rng):
    weights = np.exp(rng.normal(0, 200, size=(6, 6)))
    env = env_of(weights)
    assert polymer.log_partition(env, (0, 0), (5, 5)) == pytest.approx(mp_logz(weights), rel=1e-12)


def test_sampler_frequency_matches_exact_probability():
    env = env_of([[1.0, 2.0], [3.0, 4.0]])
    sampler = polymer.make_quenched_sampler(env, (0, 0), (1, 1))
    assert sampler.step_probabilities((0, 0)) == pytest.approx((0.4, 0.6))
    draws = polymer.quenched_sample_path(sampler, RngStream(5), count=20000)
    right = sum(p.points()[1] == (1, 0) for p in draws)
    assert abs(right / 20000 - 0.4) < 4 * math.sqrt(0.24 / 20000)


def test_sampled_path_law_matches_enumeration():
    env = sample_environment(3, 3, IG1, RngStream(8))
    sampler = polymer.make_quenched_sampler(env, (0, 0), (2, 2))
    draws = polymer.quenched_sample_path(sampler, RngStream(9), count=30000)
    all_paths = [tuple(p) for p in paths(3, 3)]
    counts = {p: 0 for p in all_paths}
    for d in draws:
        counts[tuple(d.points())] += 1
    expected = [30000 * polymer.quenched_path_probability(env, GeodesicPath(p)) for p in all_paths]
    assert stats.chisquare([counts[p] for p in all_paths], expected).pvalue > 0.001


def test_path_probabilities_sum_to_one(rng):
    weights = 1.0 / rng.standard_exponential((4, 4))
    env = env_of(weights)
    total = sum(polymer.quenched_path_probability(env, GeodesicPath(p)) for p in paths(4, 4))
    assert total == pytest.approx(1.0, rel=1e-12)


def test_first_entry_masses_match_enumeration(rng):
    weights = 1.0 / rng.standard_exponential((5, 6))
    env = env_of(weights)
    cols, mass, logz = polymer.first_entry_masses(env, (0, 0), (5, 4), 2)
    want = np.zeros(6)
    z = 0.0
    for p in paths(6, 5):
        wt = path_weight_product(weights, p)
        z += wt
        want[next(x for x, y in p if y == 2)] += wt
    assert np.allclose(mass, want / z, rtol=1e-12)
    assert logz == pytest.approx(math.log(z), rel=1e-13)
    q = polymer.quenched_crossing_probability(env, (0, 0), (5, 4), 2, 3)
    assert q == pytest.approx(want[3:].sum() / z, rel=1e-12)
    with pytest.raises(DomainError):
        polymer.first_entry_masses(env, (0, 0), (5, 4), 0)


def test_fast_entry_kernel_agrees_with_log_space(rng):
    for shape, r in [((9, 9), 4), ((30, 41), 15), ((200, 200), 100)]:
        e = rng.standard_exponential(shape)
        mass, logz = polymer.first_entry_mass_fast(e, r)
        env = env_of(1.0 / e)
        _, want, want_z = polymer.first_entry_masses(env, (0, 0), (shape[1] - 1, shape[0] - 1), r)
        assert np.allclose(mass, want, rtol=1e-10, atol=1e-300)
        assert logz == pytest.approx(want_z, rel=1e-12)


# ---------------------------------------------------------------- stationary


def test_south_stationary_matches_enumeration(rng):
    checked = 0
    for _ in range(30):
        vals = 1.0 / rng.gamma(0.5, size=7)
        row = BoundaryRow(0, -3, vals, 0)
        bulk = 1.0 / rng.standard_exponential((3, 8))
        env = env_of(bulk, origin=(-4, 1))
        spec = polymer.StationaryPolymerSpec(0.5, Side.SOUTH, 0, 50, row)
        dst = (3, 3)
        terms = []
        for i in range(-4, 4):
            h = math.exp(row_potential(vals, -3, 0, i, log=True))
            terms.append(h * math.exp(mp_logz(bulk[:, i + 4 :])))
        z = sum(terms)
        try:
            res = polymer.stationary_log_partition(env, spec, dst, edge_tol=1.0)
        except WindowTooSmallError:
            continue
        assert res.value == pytest.approx(math.log(z), rel=1e-12)
        assert np.allclose(res.exit_distribution, np.array(terms) / z, rtol=1e-11)
        assert res.mean_exit == pytest.approx(float(np.dot(np.arange(-4, 4), terms) / z))
        checked += 1
    assert checked == 30


def test_edge_mass_raises(rng):
    vals = np.full(7, 1e-3)
    row = BoundaryRow(0, -3, vals, 0)
    env = env_of(np.ones((3, 8)), origin=(-4, 1))
    spec = polymer.StationaryPolymerSpec(0.5, Side.SOUTH, 0, 50, row)
    # tiny increments put all the mass on the far left column
    with pytest.raises(WindowTooSmallError) as exc:
        polymer.stationary_log_partition(env, spec, (3, 3))
    assert exc.value.edge == -4


def test_north_is_the_half_turn_of_south(rng):
    vals = 1.0 / rng.gamma(0.5, size=7)
    row = BoundaryRow(0, -2, vals, 0)
    bulk = 1.0 / rng.standard_exponential((3, 8))
    env = env_of(bulk, origin=(-3, -3))
    spec = polymer.StationaryPolymerSpec(0.5, Side.NORTH, 0, 50, row)
    res = polymer.stationary_log_partition(env, spec, (-3, -3), edge_tol=1.0)
    terms = []
    for k in range(-3, 5):
        g = math.exp(mp_logz(bulk[:, : k + 4]))
        terms.append(g / math.exp(row_potential(vals, -2, 0, k, log=True)))
    z = sum(terms)
    assert res.value == pytest.approx(math.log(z), rel=1e-12)
    assert list(res.columns) == list(range(-3, 5))
    assert np.allclose(res.exit_distribution, np.array(terms) / z, rtol=1e-11)


def test_stationary_field_matches_pointwise(rng):
    vals = 1.0 / rng.gamma(0.5, size=11)
    row = BoundaryRow(0, -5, vals, 0)
    env = env_of(1.0 / rng.standard_exponential((4, 12)), origin=(-6, 1))
    f = polymer.stationary_log_partition_field(env, row, (-6, 5), 4)
    spec = polymer.StationaryPolymerSpec(0.5, Side.SOUTH, 0, 50, row)
    for x in range(-2, 6):
        res = polymer.stationary_log_partition(env, spec, (x, 4), edge_tol=1.0)
        assert f.value((x, 4)) == pytest.approx(res.value, rel=1e-12)


def test_closed_forms():
    a, b = polymer.characteristic_direction_polymer(0.5)
    assert a == pytest.approx(b) and a == pytest.approx(math.pi**2 / 2)
    assert polymer.expected_stationary_logZ(0.5, 10, 10) == pytest.approx(20 * polymer.DIAGONAL_FREE_ENERGY)
    assert polymer.DIAGONAL_FREE_ENERGY == pytest.approx(1.9635100260214235)
