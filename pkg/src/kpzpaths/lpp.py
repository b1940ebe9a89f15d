"""Exponential last-passage percolation: bulk fields, geodesics and stationary models."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .env import Environment, Point
from .errors import CoverageError, DomainError, WindowTooSmallError
from .lattice import (
    BoundaryRow,
    Field,
    GeodesicPath,
    PassageField,
    Side,
    crossing_point_min,
    half_turn,
)

__all__ = [
    "PassageField",
    "GeodesicPath",
    "StationaryBoundarySpec",
    "ExitRecord",
    "Side",
    "bulk_passage_field",
    "backward_passage_field",
    "geodesic_backtrack",
    "crossing_point_min",
    "stationary_passage",
    "stationary_passages",
    "stationary_geodesic",
    "stationary_entry_values",
    "stationary_passage_field",
    "restricted_stationary_passage",
    "characteristic_direction_lpp",
    "expected_stationary_G",
    "exit_e1_intersection",
    "default_window",
    "passage_value",
    "geodesic_row_entry",
]


def _point(z) -> Point:
    return (int(z[0]), int(z[1]))


def _corner_floor(width: int) -> np.ndarray:
    f = np.full(width, -np.inf)
    f[0] = 0.0
    return f


def bulk_passage_field(env: Environment, src: Point) -> PassageField:
    """G_{src, z} for every z in the environment northeast of ``src``."""
    src = _point(src)
    if not env.contains(src):
        raise DomainError(f"source {src} outside environment")
    hi = (env.x_range[1], env.y_range[1])
    w = env.block(src, hi)
    vals = K.lpp_sweep(w, _corner_floor(w.shape[1]))
    return Field(vals, src, src, env.env_id)


def backward_passage_field(env: Environment, dst: Point, lo: Optional[Point] = None) -> PassageField:
    """G_{z, dst} for every z in the rectangle ``lo..dst``."""
    dst = _point(dst)
    lo = (env.x_range[0], env.y_range[0]) if lo is None else _point(lo)
    if not (env.contains(dst) and env.contains(lo)) or lo[0] > dst[0] or lo[1] > dst[1]:
        raise DomainError(f"rectangle {lo}..{dst} not inside environment")
    w = np.ascontiguousarray(env.block(lo, dst)[::-1, ::-1])
    vals = K.lpp_sweep(w, _corner_floor(w.shape[1]))[::-1, ::-1].copy()
    return Field(vals, lo, ("to", dst), env.env_id)


def passage_value(env: Environment, src: Point, dst: Point) -> float:
    return bulk_passage_field(env, src).value(dst)


def geodesic_backtrack(field: PassageField, env: Environment, dst: Point) -> GeodesicPath:
    """Argmax path from the field's source to ``dst``; ties step back along -e2."""
    dst = _point(dst)
    src = field.source
    if not isinstance(src, tuple) or len(src) != 2 or not isinstance(src[0], int):
        raise DomainError("backtracking needs a point-to-point field")
    if field.env_id is not None and field.env_id != env.env_id:
        raise DomainError("field was computed from a different environment")
    if dst[0] < src[0] or dst[1] < src[1]:
        raise DomainError(f"destination {dst} is not northeast of source {src}")
    if not field.contains(dst):
        raise DomainError(f"destination {dst} outside field")
    rel = K.backtrack(field.values, dst[0] - src[0], dst[1] - src[1])
    return GeodesicPath(rel + np.array(src, dtype=np.int64))


def geodesic_row_entry(env: Environment, src: Point, dst: Point, r: int) -> tuple[int, int]:
    """First column where the src-to-dst geodesic enters row ``r`` and the largest
    ``x - y`` over its vertices at or below that row (ties broken toward -e2)."""
    src, dst = _point(src), _point(dst)
    if not src[1] < r <= dst[1]:
        raise DomainError(f"row {r} must satisfy {src[1]} < r <= {dst[1]}")
    if dst[0] < src[0]:
        raise DomainError(f"{dst} is not northeast of {src}")
    w = np.ascontiguousarray(env.block(src, dst))
    entry, excursion = K.lpp_entry_and_excursion(w, r - src[1])
    return int(entry) + src[0], int(excursion) + src[0] - src[1]


# ---------------------------------------------------------------------------
# closed forms


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    return rho


def characteristic_direction_lpp(rho: float) -> tuple[float, float]:
    rho = _check_rho(rho)
    return (rho * rho, (1.0 - rho) ** 2)


def expected_stationary_G(rho: float, m: float, n: float) -> float:
    """E G^rho from the boundary origin to (m, n)."""
    rho = _check_rho(rho)
    return m / rho + n / (1.0 - rho)


def exit_e1_intersection(rho: float, n: int) -> float:
    """Where the ray from (n, n) in direction -xi[rho] meets the e1-axis."""
    rho = _check_rho(rho)
    if n < 1:
        raise DomainError("n must be at least 1")
    return n - n * rho * rho / (1.0 - rho) ** 2


def default_window(m: int) -> int:
    """Half-width 8 m^{2/3} around the characteristic exit point."""
    return max(1, int(math.ceil(8.0 * max(m, 1) ** (2.0 / 3.0))))


# ---------------------------------------------------------------------------
# stationary models


@dataclass(frozen=True)
class StationaryBoundarySpec:
    """Horizontal-boundary stationary model.

    For ``Side.SOUTH`` the boundary row lies below the bulk and passage values
    are measured from ``(boundary.origin_x, boundary_row)`` to points above.
    For ``Side.NORTH`` the row lies above the bulk and values are measured from
    points below to the row's origin.  ``window`` is the half-width of the
    range of boundary columns considered, centred on the characteristic exit.
    """

    rho: float
    side: Side
    boundary_row: int
    window: int
    boundary_weights: Optional[BoundaryRow] = None

    def __post_init__(self):
        _check_rho(self.rho)
        object.__setattr__(self, "side", Side(self.side))
        if int(self.window) < 1:
            raise DomainError("window must be at least 1")
        b = self.boundary_weights
        if b is not None and b.row != self.boundary_row:
            raise DomainError("boundary weights sit on a different row")

    def rotated(self) -> "StationaryBoundarySpec":
        other = Side.NORTH if self.side is Side.SOUTH else Side.SOUTH
        b = None if self.boundary_weights is None else self.boundary_weights.rotated()
        return replace(self, side=other, boundary_row=-self.boundary_row, boundary_weights=b)


@dataclass(frozen=True)
class ExitRecord:
    exit_index: int
    value: float
    argmax_unique: bool
    window: tuple[int, int]


def window_columns(env: Environment, spec: StationaryBoundarySpec, dst: Point, slope: float):
    """Candidate entry columns ``lo..hi`` for a south-side model.

    The window is centred where the ray from ``dst`` in direction -xi meets the
    row and is clipped to what the environment and boundary row cover.  The left
    end is always a truncation; the right end is one unless it equals ``dst.x``.
    """
    b = spec.boundary_row
    m = dst[1] - b
    centre = int(round(dst[0] - m * slope))
    blo, bhi = _boundary(spec).column_span()
    lo = max(centre - spec.window, env.x_range[0], blo)
    hi = min(centre + spec.window, dst[0], bhi)
    if lo > hi:
        raise CoverageError(f"no admissible entry columns for {dst} (window {spec.window})")
    return lo, hi, hi < dst[0]


def _boundary(spec: StationaryBoundarySpec) -> BoundaryRow:
    if spec.boundary_weights is None:
        raise DomainError("stationary computations need boundary weights")
    return spec.boundary_weights


def stationary_entry_values(env: Environment, spec: StationaryBoundarySpec, dst: Point):
    """Bulk passage values from each candidate entry point, for a south-side model.

    Returns ``(columns, G_{(i, row+1), dst})``.  The bulk part does not depend
    on the boundary, so callers comparing several boundary rows reuse it.
    """
    dst = _point(dst)
    b = spec.boundary_row
    lo, hi, _ = window_columns(env, spec, dst, _slope(spec.rho))
    corner = (lo, b + 1)
    if not (env.contains(corner) and env.contains(dst)):
        raise CoverageError(f"environment must cover {corner}..{dst}")
    field = backward_passage_field(env, dst, corner)
    cols = np.arange(lo, hi + 1)
    return cols, field.values[0, : hi - lo + 1].copy()


def _slope(rho: float) -> float:
    a, c = characteristic_direction_lpp(rho)
    return a / c


def _combine(env, spec, dst, cols, bulk, interval=None) -> ExitRecord:
    lo, hi, trunc_hi = window_columns(env, spec, dst, _slope(spec.rho))
    h = _boundary(spec).potential(lo, hi)
    vals = h + bulk
    if interval is not None:
        a, c = interval
        vals = np.where((cols >= a) & (cols <= c), vals, -np.inf)
    k = int(np.argmax(vals))
    best = vals[k]
    unique = int(np.count_nonzero(vals == best)) == 1
    i = int(cols[k])
    if interval is None and (i == lo or (trunc_hi and i == hi)):
        raise WindowTooSmallError(
            f"argmax at truncation edge {i} (window {spec.window})", edge=i, window=spec.window
        )
    return ExitRecord(i, float(best), unique, (lo, hi))


def _south_passages(env, spec, dst, rows) -> list[ExitRecord]:
    b = spec.boundary_row
    if dst[1] < b:
        raise DomainError(f"{dst} lies below the boundary row {b}")
    if dst[1] == b:
        out = []
        for row in rows:
            v = float(row.potential(dst[0], dst[0])[0])
            out.append(ExitRecord(dst[0], v, True, (dst[0], dst[0])))
        return out
    cols, bulk = stationary_entry_values(env, spec, dst)
    return [_combine(env, replace(spec, boundary_weights=row), dst, cols, bulk) for row in rows]


def _south_passage(env, spec, dst) -> ExitRecord:
    return _south_passages(env, spec, dst, [_boundary(spec)])[0]


def _to_south(env, spec, point):
    """Half-turn a north-side problem into a south-side one."""
    return env.rotated_half_turn(), spec.rotated(), half_turn(point)


def stationary_passage(env: Environment, spec: StationaryBoundarySpec, point: Point) -> ExitRecord:
    """Stationary last-passage value and its boundary exit column.

    South side: value from the boundary origin to ``point``.  North side: value
    from ``point`` to the boundary origin, with ``exit_index`` the column where
    the path reaches the row.
    """
    return stationary_passages(env, spec, point, [_boundary(spec)])[0]


def stationary_passages(
    env: Environment, spec: StationaryBoundarySpec, point: Point, rows: Sequence[BoundaryRow]
) -> list[ExitRecord]:
    """:func:`stationary_passage` for several boundary rows over one bulk sweep.

    All rows must cover the same columns as ``spec.boundary_weights``.
    """
    point = _point(point)
    _boundary(spec)
    if spec.side is Side.SOUTH:
        return _south_passages(env, spec, point, rows)
    if point[1] > spec.boundary_row:
        raise DomainError(f"{point} lies above the boundary row {spec.boundary_row}")
    renv, rspec, rpt = _to_south(env, spec, point)
    recs = _south_passages(renv, rspec, rpt, [row.rotated() for row in rows])
    return [
        ExitRecord(-rec.exit_index, rec.value, rec.argmax_unique, (-rec.window[1], -rec.window[0]))
        for rec in recs
    ]


def restricted_stationary_passage(
    env: Environment, spec: StationaryBoundarySpec, point: Point, interval: tuple[int, int]
) -> float:
    """Stationary value with the exit column restricted to ``interval``."""
    point = _point(point)
    a, c = int(interval[0]), int(interval[1])
    if a > c:
        raise DomainError("interval must satisfy a <= b")
    if spec.side is Side.NORTH:
        if point[1] > spec.boundary_row:
            raise DomainError(f"{point} lies above the boundary row {spec.boundary_row}")
        env, spec, point = _to_south(env, spec, point)
        a, c = -c, -a
    if point[1] == spec.boundary_row:
        if not a <= point[0] <= c:
            raise DomainError("interval excludes the only admissible column")
        return _south_passage(env, spec, point).value
    lo, hi, _ = window_columns(env, spec, point, _slope(spec.rho))
    if c < lo or a > hi:
        raise DomainError(f"interval [{a}, {c}] misses the window [{lo}, {hi}]")
    cols, bulk = stationary_entry_values(env, spec, point)
    return _combine(env, spec, point, cols, bulk, (a, c)).value


def stationary_geodesic(env: Environment, spec: StationaryBoundarySpec, point: Point) -> GeodesicPath:
    """Bulk part of the stationary geodesic, including its vertex on the row.

    South side: from ``(exit, row)`` up to ``point``.  North side: from
    ``point`` up to ``(exit, row)``.
    """
    point = _point(point)
    rec = stationary_passage(env, spec, point)
    b = spec.boundary_row
    k = rec.exit_index
    if spec.side is Side.SOUTH:
        if point[1] == b:
            return GeodesicPath(np.array([[k, b]]))
        start = (k, b + 1)
        field = bulk_passage_field_rect(env, start, point)
        path = geodesic_backtrack(field, env, point)
        return GeodesicPath(np.vstack([[k, b], path.vertices]))
    if point[1] == b:
        return GeodesicPath(np.array([[k, b]]))
    end = (k, b - 1)
    field = bulk_passage_field_rect(env, point, end)
    path = geodesic_backtrack(field, env, end)
    return GeodesicPath(np.vstack([path.vertices, [k, b]]))


def bulk_passage_field_rect(env: Environment, src: Point, dst: Point) -> PassageField:
    """Field from ``src`` restricted to the rectangle ``src..dst``."""
    src, dst = _point(src), _point(dst)
    if not (env.contains(src) and env.contains(dst)) or dst[0] < src[0] or dst[1] < src[1]:
        raise DomainError(f"rectangle {src}..{dst} not inside environment")
    w = env.block(src, dst)
    return Field(K.lpp_sweep(w, _corner_floor(w.shape[1])), src, src, env.env_id)


def stationary_passage_field(
    env: Environment, boundary: BoundaryRow, columns: tuple[int, int], top: int
) -> PassageField:
    """Forward south-side stationary field over ``columns`` x ``row+1..top``.

    Entry through columns left of ``columns[0]`` is cut off, so values are exact
    for the truncated model and approximate the full one away from the left edge.
    """
    lo, hi = int(columns[0]), int(columns[1])
    b = boundary.row
    if top <= b:
        raise DomainError("top row must lie above the boundary")
    w = env.block((lo, b + 1), (hi, top))
    floor = boundary.potential(lo, hi)
    return Field(K.lpp_sweep(w, floor), (lo, b + 1), ("boundary", b), env.env_id)
