"""Inverse-gamma directed polymer: log partition fields, quenched measures, stationary models."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .env import Environment, Point, RngStream, digamma, trigamma
from .errors import CoverageError, DomainError, WindowTooSmallError
from .lattice import BoundaryRow, Field, GeodesicPath, LogPartitionField, Side, half_turn
from .lpp import StationaryBoundarySpec, _check_rho, _corner_floor, _point, window_columns

__all__ = [
    "LogPartitionField",
    "QuenchedSampler",
    "StationaryPolymerSpec",
    "StationaryPolymerResult",
    "bulk_log_partition",
    "backward_log_partition",
    "log_partition",
    "make_quenched_sampler",
    "quenched_sample_path",
    "quenched_path_probability",
    "first_entry_masses",
    "quenched_crossing_probability",
    "stationary_log_partition",
    "stationary_log_partitions",
    "stationary_entry_log_values",
    "stationary_log_partition_field",
    "characteristic_direction_polymer",
    "expected_stationary_logZ",
    "first_entry_mass_fast",
    "DIAGONAL_FREE_ENERGY",
]

# free energy per step along the diagonal for Ga^{-1}(1) weights: -psi0(1/2)
DIAGONAL_FREE_ENERGY = -digamma(0.5)

# the stationary polymer shares the LPP boundary spec; the row stores Ga^{-1}(rho) weights
StationaryPolymerSpec = StationaryBoundarySpec


def _log_weights(w: np.ndarray) -> np.ndarray:
    return np.log(w)


def bulk_log_partition(env: Environment, src: Point) -> LogPartitionField:
    """log Z_{src, z} for every z northeast of ``src`` in the environment."""
    src = _point(src)
    if not env.contains(src):
        raise DomainError(f"source {src} outside environment")
    w = env.block(src, (env.x_range[1], env.y_range[1]))
    vals = K.logz_sweep(_log_weights(w), _corner_floor(w.shape[1]))
    return Field(vals, src, src, env.env_id)


def backward_log_partition(env: Environment, dst: Point, lo: Optional[Point] = None) -> LogPartitionField:
    """log Z_{z, dst} for every z in the rectangle ``lo..dst``."""
    dst = _point(dst)
    lo = (env.x_range[0], env.y_range[0]) if lo is None else _point(lo)
    if not (env.contains(dst) and env.contains(lo)) or lo[0] > dst[0] or lo[1] > dst[1]:
        raise DomainError(f"rectangle {lo}..{dst} not inside environment")
    lw = np.ascontiguousarray(_log_weights(env.block(lo, dst))[::-1, ::-1])
    vals = K.logz_sweep(lw, _corner_floor(lw.shape[1]))[::-1, ::-1].copy()
    return Field(vals, lo, ("to", dst), env.env_id)


def log_partition(env: Environment, src: Point, dst: Point) -> float:
    src, dst = _point(src), _point(dst)
    if dst[0] < src[0] or dst[1] < src[1]:
        raise DomainError(f"{dst} is not northeast of {src}")
    w = env.block(src, dst)
    vals = K.logz_sweep(_log_weights(w), _corner_floor(w.shape[1]))
    return float(vals[-1, -1])


# ---------------------------------------------------------------------------
# quenched measure


@dataclass(frozen=True, eq=False)
class QuenchedSampler:
    """Samples from the point-to-point quenched measure using log Z_{z, dst}."""

    field: LogPartitionField
    env_id: int
    src: Point
    dst: Point

    def step_probabilities(self, z: Point) -> tuple[float, float]:
        """(P(step +e1), P(step +e2)) from ``z``."""
        x, y = z
        if z == self.dst:
            return (0.0, 0.0)
        if x == self.dst[0]:
            return (0.0, 1.0)
        if y == self.dst[1]:
            return (1.0, 0.0)
        a = self.field.value((x + 1, y))
        b = self.field.value((x, y + 1))
        p1 = 1.0 / (1.0 + math.exp(b - a))
        return (p1, 1.0 - p1)


def make_quenched_sampler(env: Environment, src: Point, dst: Point) -> QuenchedSampler:
    src, dst = _point(src), _point(dst)
    if dst[0] < src[0] or dst[1] < src[1]:
        raise DomainError(f"{dst} is not northeast of {src}")
    field = backward_log_partition(env, dst, src)
    return QuenchedSampler(field, env.env_id, src, dst)


def quenched_sample_path(sampler: QuenchedSampler, stream: RngStream, count: Optional[int] = None):
    """One path (or ``count`` paths) drawn exactly from Q_{src,dst}.

    Walking forward from ``src``, the step to ``z+e1`` is taken with probability
    Z_{z+e1,dst} / (Z_{z+e1,dst} + Z_{z+e2,dst}); the product of these ratios is
    the path weight over Z_{src,dst}.
    """
    rng = stream.generator()
    n_paths = 1 if count is None else int(count)
    src, dst = sampler.src, sampler.dst
    nx = dst[0] - src[0]
    ny = dst[1] - src[1]
    # probabilities of +e1 on the interior, precomputed once
    L = sampler.field.values
    a = L[:, 1:]  # log Z at z + e1
    b = L[1:, :]  # log Z at z + e2
    p1 = np.ones_like(L)
    p1[:-1, :-1] = 1.0 / (1.0 + np.exp(b[:, :-1] - a[:-1, :]))
    p1[-1, :] = 1.0
    p1[:, -1] = 0.0
    u = rng.random((n_paths, nx + ny))
    out = []
    for k in range(n_paths):
        x = y = 0
        verts = np.empty((nx + ny + 1, 2), dtype=np.int64)
        verts[0] = src
        for s in range(nx + ny):
            if u[k, s] < p1[y, x]:
                x += 1
            else:
                y += 1
            verts[s + 1, 0] = src[0] + x
            verts[s + 1, 1] = src[1] + y
        out.append(GeodesicPath(verts))
    return out[0] if count is None else out


def quenched_path_probability(env: Environment, path: GeodesicPath) -> float:
    """Q_{src,dst}(path) = prod w / Z."""
    return math.exp(path.log_weight(env) - log_partition(env, path.start, path.end))


def first_entry_masses(env: Environment, src: Point, dst: Point, r: int):
    """Quenched law of the column where the path first enters row ``r``.

    Entering at column j means visiting (j, r-1) and then (j, r), so the mass is
    Z_{src,(j,r-1)} Z_{(j,r),dst} / Z_{src,dst}.  Returns (columns, masses, log Z).
    """
    src, dst = _point(src), _point(dst)
    if not src[1] < r <= dst[1]:
        raise DomainError(f"row {r} must satisfy {src[1]} < r <= {dst[1]}")
    if dst[0] < src[0]:
        raise DomainError(f"{dst} is not northeast of {src}")
    fwd = log_partition_rect(env, src, (dst[0], r - 1))
    bwd = backward_log_partition(env, dst, (src[0], r))
    below = fwd.row(r - 1)
    above = bwd.row(r)
    terms = below + above
    logz = float(np.logaddexp.reduce(terms))
    cols = np.arange(src[0], dst[0] + 1)
    return cols, np.exp(terms - logz), logz


def log_partition_rect(env: Environment, src: Point, dst: Point) -> LogPartitionField:
    w = env.block(src, dst)
    vals = K.logz_sweep(_log_weights(w), _corner_floor(w.shape[1]))
    return Field(vals, src, src, env.env_id)


def quenched_crossing_probability(env: Environment, src: Point, dst: Point, r: int, c: int) -> float:
    """Quenched probability that the first vertex in row ``r`` has e1-coordinate >= c."""
    cols, mass, _ = first_entry_masses(env, src, dst, r)
    q = float(mass[cols >= c].sum())
    return min(1.0, max(0.0, q))


def first_entry_mass_fast(e: np.ndarray, r: int, c: Optional[float] = None):
    """First-entry law into row ``r`` for the rectangle ``(0,0)..(n_x, n_y)``.

    ``e`` holds Exp(1) draws and the weights are ``1/e`` (Ga^{-1}(1)).  Linear
    arithmetic with per-row rescaling and a per-step factor exp(-c); agrees with
    the log-space route to rounding error.  Returns (masses, log Z).
    """
    e = np.ascontiguousarray(e, dtype=float)
    if not 1 <= r < e.shape[0]:
        raise DomainError(f"row {r} must satisfy 0 < r < {e.shape[0]}")
    c = DIAGONAL_FREE_ENERGY if c is None else float(c)
    return K.polymer_first_entry_mass(e, int(r), c)


# ---------------------------------------------------------------------------
# closed forms


def characteristic_direction_polymer(rho: float) -> tuple[float, float]:
    rho = _check_rho(rho)
    return (float(trigamma(1.0 - rho)), float(trigamma(rho)))


def expected_stationary_logZ(rho: float, m: float, n: float) -> float:
    rho = _check_rho(rho)
    return -m * float(digamma(rho)) - n * float(digamma(1.0 - rho))


# ---------------------------------------------------------------------------
# stationary polymer


@dataclass(frozen=True)
class StationaryPolymerResult:
    value: float
    columns: np.ndarray
    exit_distribution: np.ndarray
    window: tuple[int, int]

    @property
    def mean_exit(self) -> float:
        return float(np.dot(self.columns, self.exit_distribution))

    def mass_in(self, a: int, b: int) -> float:
        sel = (self.columns >= a) & (self.columns <= b)
        return float(self.exit_distribution[sel].sum())


def _slope(rho: float) -> float:
    a, c = characteristic_direction_polymer(rho)
    return a / c


def _geometry(env, spec, dst):
    return window_columns(env, spec, dst, _slope(spec.rho))


def stationary_entry_log_values(env: Environment, spec: StationaryPolymerSpec, dst: Point):
    """``(columns, log Z_{(i,row+1),dst})`` for a south-side model."""
    dst = _point(dst)
    lo, hi, _ = _geometry(env, spec, dst)
    corner = (lo, spec.boundary_row + 1)
    if not (env.contains(corner) and env.contains(dst)):
        raise CoverageError(f"environment must cover {corner}..{dst}")
    field = backward_log_partition(env, dst, corner)
    return np.arange(lo, hi + 1), field.values[0, : hi - lo + 1].copy()


def combine_entry_log_values(env, spec, dst, cols, bulk, edge_tol: float = 1e-9) -> StationaryPolymerResult:
    lo, hi, trunc_hi = _geometry(env, spec, dst)
    if spec.boundary_weights is None:
        raise DomainError("stationary computations need boundary weights")
    terms = spec.boundary_weights.potential(lo, hi, log=True) + bulk
    logz = float(np.logaddexp.reduce(terms))
    mass = np.exp(terms - logz)
    edge = mass[0]
    if trunc_hi:
        edge = max(edge, mass[-1])
    if edge > edge_tol:
        i = lo if mass[0] > edge_tol else hi
        raise WindowTooSmallError(
            f"quenched mass {edge:.3g} at truncation edge {i} (window {spec.window})", edge=i, window=spec.window
        )
    return StationaryPolymerResult(logz, cols, mass, (lo, hi))


def _south(env, spec, dst, rows, edge_tol):
    b = spec.boundary_row
    if dst[1] < b:
        raise DomainError(f"{dst} lies below the boundary row {b}")
    if dst[1] == b:
        out = []
        for row in rows:
            v = float(row.potential(dst[0], dst[0], log=True)[0])
            out.append(StationaryPolymerResult(v, np.array([dst[0]]), np.array([1.0]), (dst[0], dst[0])))
        return out
    cols, bulk = stationary_entry_log_values(env, spec, dst)
    return [
        combine_entry_log_values(env, replace(spec, boundary_weights=row), dst, cols, bulk, edge_tol)
        for row in rows
    ]


def stationary_log_partition(
    env: Environment, spec: StationaryPolymerSpec, point: Point, edge_tol: float = 1e-9
) -> StationaryPolymerResult:
    """log Z^rho and the quenched law of the boundary entry column.

    Orientation as in :func:`kpzpaths.lpp.stationary_passage`; for the north side
    the distribution is over the column where the path reaches the row.
    """
    if spec.boundary_weights is None:
        raise DomainError("stationary computations need boundary weights")
    return stationary_log_partitions(env, spec, point, [spec.boundary_weights], edge_tol)[0]


def stationary_log_partitions(
    env: Environment,
    spec: StationaryPolymerSpec,
    point: Point,
    rows: Sequence[BoundaryRow],
    edge_tol: float = 1e-9,
) -> list[StationaryPolymerResult]:
    """:func:`stationary_log_partition` for several boundary rows over one bulk sweep."""
    point = _point(point)
    if spec.boundary_weights is None:
        raise DomainError("stationary computations need boundary weights")
    if spec.side is Side.SOUTH:
        return _south(env, spec, point, rows, edge_tol)
    if point[1] > spec.boundary_row:
        raise DomainError(f"{point} lies above the boundary row {spec.boundary_row}")
    res = _south(env.rotated_half_turn(), spec.rotated(), half_turn(point), [r.rotated() for r in rows], edge_tol)
    return [
        StationaryPolymerResult(
            x.value, -x.columns[::-1], x.exit_distribution[::-1].copy(), (-x.window[1], -x.window[0])
        )
        for x in res
    ]


def stationary_log_partition_field(
    env: Environment, boundary: BoundaryRow, columns: tuple[int, int], top: int
) -> LogPartitionField:
    """Forward south-side stationary log partition field; see the LPP analogue."""
    lo, hi = int(columns[0]), int(columns[1])
    b = boundary.row
    if top <= b:
        raise DomainError("top row must lie above the boundary")
    w = env.block((lo, b + 1), (hi, top))
    floor = boundary.potential(lo, hi, log=True)
    return Field(K.logz_sweep(_log_weights(w), floor), (lo, b + 1), ("boundary", b), env.env_id)
