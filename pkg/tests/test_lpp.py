import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_lpp, brute_lpp_argmax, row_potential
from kpzpaths import lpp
from kpzpaths.env import Environment, Exponential, RngStream, sample_environment
from kpzpaths.errors import DomainError, WindowTooSmallError
from kpzpaths.lattice import BoundaryRow, GeodesicPath, Side, crossing_point_min

EXP1 = Exponential(1.0)


def env_of(w, origin=(0, 0)):
    return Environment(np.asarray(w, dtype=float), EXP1, origin_offset=origin)


def test_two_by_two_example():
    env = env_of([[1.0, 2.0], [3.0, 4.0]])
    assert lpp.passage_value(env, (0, 0), (1, 1)) == 8.0
    field = lpp.bulk_passage_field(env, (0, 0))
    path = lpp.geodesic_backtrack(field, env, (1, 1))
    assert path.points() == [(0, 0), (0, 1), (1, 1)]


@settings(max_examples=300, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0.01, 10.0)))
def test_dp_equals_brute_force_exactly(w):
    env = env_of(w)
    h, wd = w.shape
    assert lpp.passage_value(env, (0, 0), (wd - 1, h - 1)) == brute_lpp(w)


def test_geodesic_is_the_argmax_path(rng):
    for _ in range(50):
        w = rng.standard_exponential((5, 6))
        env = env_of(w)
        best, arg = brute_lpp_argmax(w)
        path = lpp.geodesic_backtrack(lpp.bulk_passage_field(env, (0, 0)), env, (5, 4))
        assert path.points() == arg
        assert path.weight(env) == lpp.passage_value(env, (0, 0), (5, 4))


def test_ties_step_back_along_e2():
    env = env_of(np.ones((3, 3)))
    path = lpp.geodesic_backtrack(lpp.bulk_passage_field(env, (0, 0)), env, (2, 2))
    assert path.points() == [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]


def test_fields_on_offset_grid(rng):
    w = rng.standard_exponential((4, 5))
    env = env_of(w, origin=(-2, 3))
    f = lpp.bulk_passage_field(env, (-1, 4))
    assert f.value((2, 6)) == brute_lpp(w[1:, 1:])
    b = lpp.backward_passage_field(env, (1, 5))
    assert b.value((-2, 3)) == pytest.approx(brute_lpp(w[:3, :4]), rel=1e-15)
    assert b.value((1, 5)) == w[2, 3]


def test_domain_errors():
    env = env_of(np.ones((3, 3)))
    with pytest.raises(DomainError):
        lpp.passage_value(env, (2, 2), (0, 0))
    with pytest.raises(DomainError):
        lpp.passage_value(env, (0, 0), (3, 3))


# ---------------------------------------------------------------- stationary


def random_south(rng, width=6, height=3, lo=-3, rho=0.5):
    vals = rng.exponential(1 / rho, size=width - 1)
    row = BoundaryRow(0, lo + 1, vals, 0)
    bulk = rng.standard_exponential((height, width))
    env = env_of(bulk, origin=(lo, 1))
    return row, bulk, env


def brute_south(row, bulk, lo, dst, interval=None):
    best, arg = -np.inf, None
    for i in range(lo, dst[0] + 1):
        if interval and not interval[0] <= i <= interval[1]:
            continue
        sub = bulk[: dst[1], i - lo : dst[0] - lo + 1]
        v = row_potential(row.values, row.first, row.origin_x, i) + brute_lpp(sub)
        if v > best:
            best, arg = v, i
    return best, arg


def test_south_stationary_equals_brute_force(rng):
    checked = 0
    for _ in range(60):
        row, bulk, env = random_south(rng)
        spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, row)
        want, arg = brute_south(row, bulk, -3, (2, 3))
        if arg == -3:
            with pytest.raises(WindowTooSmallError):
                lpp.stationary_passage(env, spec, (2, 3))
            continue
        rec = lpp.stationary_passage(env, spec, (2, 3))
        assert rec.value == pytest.approx(want, rel=1e-13)
        assert rec.exit_index == arg
        checked += 1
    assert checked > 20


def test_restricted_stationary_value(rng):
    row, bulk, env = random_south(rng)
    spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, row)
    want, _ = brute_south(row, bulk, -3, (2, 3), interval=(0, 1))
    assert lpp.restricted_stationary_passage(env, spec, (2, 3), (0, 1)) == pytest.approx(want, rel=1e-13)


def test_stationary_geodesic_carries_the_value(rng):
    for _ in range(20):
        row, bulk, env = random_south(rng, width=8, height=4, lo=-4)
        spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, row)
        try:
            rec = lpp.stationary_passage(env, spec, (3, 4))
        except WindowTooSmallError:
            continue
        g = lpp.stationary_geodesic(env, spec, (3, 4))
        assert g.start == (rec.exit_index, 0)
        bulk_part = GeodesicPath(g.vertices[1:]).weight(env)
        h = row.potential(rec.exit_index, rec.exit_index)[0]
        assert h + bulk_part == pytest.approx(rec.value, rel=1e-13)


def test_north_stationary_equals_brute_force(rng):
    # row on y = 0 above a bulk on rows -3..-1, path from (-3, -3) to the row origin
    checked = 0
    for _ in range(40):
        vals = rng.exponential(2.0, size=6)
        row = BoundaryRow(0, -2, vals, 0)
        bulk = rng.standard_exponential((3, 7))
        env = env_of(bulk, origin=(-3, -3))
        spec = lpp.StationaryBoundarySpec(0.5, Side.NORTH, 0, 50, row)
        best, arg = -np.inf, None
        for k in range(-3, 4):
            v = brute_lpp(bulk[:, : k + 4]) - row_potential(vals, -2, 0, k)
            if v > best:
                best, arg = v, k
        try:
            rec = lpp.stationary_passage(env, spec, (-3, -3))
        except WindowTooSmallError as exc:
            assert arg == 3 and exc.edge == -3
            continue
        assert rec.value == pytest.approx(best, rel=1e-13)
        assert rec.exit_index == arg
        g = lpp.stationary_geodesic(env, spec, (-3, -3))
        assert g.start == (-3, -3) and g.end == (arg, 0)
        checked += 1
    assert checked > 10


def test_several_rows_share_one_sweep(rng):
    row, bulk, env = random_south(rng, width=10, height=4, lo=-6)
    other = row.with_values(row.values * 1.3)
    spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, row)
    both = lpp.stationary_passages(env, spec, (3, 4), [row, other])
    for rec, r in zip(both, [row, other]):
        try:
            single = lpp.stationary_passage(env, lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, r), (3, 4))
        except WindowTooSmallError:
            continue
        assert rec == single


def test_window_too_small_is_reported():
    row = BoundaryRow(0, -19, np.full(23, 0.001), 0)
    env = env_of(np.ones((2, 24)), origin=(-20, 1))
    spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 2, row)
    # tiny boundary increments make the leftmost column of the window optimal
    with pytest.raises(WindowTooSmallError) as exc:
        lpp.stationary_passage(env, spec, (3, 2))
    assert exc.value.window == 2


def test_stationary_field_agrees_with_pointwise_value(rng):
    row, bulk, env = random_south(rng, width=12, height=5, lo=-6)
    f = lpp.stationary_passage_field(env, row, (-6, 5), 5)
    spec = lpp.StationaryBoundarySpec(0.5, Side.SOUTH, 0, 50, row)
    for x in range(-2, 6):
        try:
            rec = lpp.stationary_passage(env, spec, (x, 5))
        except WindowTooSmallError:
            continue
        assert f.value((x, 5)) == pytest.approx(rec.value, rel=1e-13)


# ---------------------------------------------------------------- closed forms


def test_closed_forms():
    assert lpp.expected_stationary_G(0.5, 64, 64) == 256.0
    assert lpp.characteristic_direction_lpp(0.4) == pytest.approx((0.16, 0.36))
    assert lpp.exit_e1_intersection(0.5, 256) == 0.0
    assert lpp.exit_e1_intersection(0.4, 90) == pytest.approx(90 - 90 * 0.16 / 0.36)
    assert lpp.default_window(64) == 128
    with pytest.raises(DomainError):
        lpp.expected_stationary_G(1.0, 1, 1)


def test_stationary_mean_matches_formula():
    from kpzpaths.harness.experiments import stationary_sample
    from kpzpaths.env import replica_stream

    vals = [stationary_sample("lpp", 0.5, 16, 16, replica_stream(3, 1, i)).value for i in range(2000)]
    m, se = np.mean(vals), np.std(vals, ddof=1) / np.sqrt(len(vals))
    assert abs(m - 64.0) < 4 * se


# ---------------------------------------------------------------- row crossings


def test_row_entry_matches_backtracked_geodesic(rng):
    for _ in range(100):
        h, w = rng.integers(2, 9, size=2)
        env = sample_environment(int(w), int(h), EXP1, RngStream(int(rng.integers(1 << 30))))
        r = int(rng.integers(1, h))
        path = lpp.geodesic_backtrack(lpp.bulk_passage_field(env, (0, 0)), env, (w - 1, h - 1))
        entry, excursion = lpp.geodesic_row_entry(env, (0, 0), (w - 1, h - 1), r)
        assert entry == crossing_point_min(path, r)[0]
        assert excursion == max(x - y for x, y in path.points() if y <= r)
