"""Lattice-level value types shared by the LPP, polymer and Busemann modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import Environment, Point
from .errors import CoverageError, DomainError


class Side(str, enum.Enum):
    """Which side of its row the bulk of a stationary model sits on.

    ``SOUTH``: boundary below, paths start on the row and go up.
    ``NORTH``: boundary above, paths start below and finish on the row.
    """

    SOUTH = "south"
    NORTH = "north"


def half_turn(z: Point) -> Point:
    return (-z[0], -z[1])


@dataclass(frozen=True, eq=False)
class BoundaryRow:
    """Increments on the horizontal edges of row ``row``.

    ``values[k]`` sits on the edge ``[(j-1, row), (j, row)]`` with ``j = first + k``.
    The potential ``h`` vanishes at ``origin_x``; to the right it adds the
    increments, to the left it subtracts them.  For multiplicative (polymer)
    rows use ``log=True`` to get ``log h``.
    """

    row: int
    first: int
    values: np.ndarray
    origin_x: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise DomainError("boundary values must be a non-empty 1-d sequence")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def last(self) -> int:
        return self.first + self.values.size - 1

    def column_span(self) -> tuple[int, int]:
        """Columns whose potential is computable."""
        lo = self.first - 1
        hi = self.last
        return lo, hi

    def covers(self, lo: int, hi: int) -> bool:
        a, b = self.column_span()
        return a <= min(lo, self.origin_x) and max(hi, self.origin_x) <= b

    def increment(self, j: int) -> float:
        if not self.first <= j <= self.last:
            raise CoverageError(f"edge {j} not in boundary row")
        return float(self.values[j - self.first])

    def potential(self, lo: int, hi: int, log: bool = False) -> np.ndarray:
        """``h_i`` for ``i = lo..hi``, accumulated outward from the origin."""
        if lo > hi:
            raise DomainError("empty column range")
        if not self.covers(lo, hi):
            raise CoverageError(
                f"boundary row spans columns {self.column_span()}, need {lo}..{hi} and origin {self.origin_x}"
            )
        inc = np.log(self.values) if log else self.values
        o = self.origin_x
        out = np.empty(hi - lo + 1)
        if hi > o:
            right = np.cumsum(inc[o + 1 - self.first : hi + 1 - self.first])
            s = max(lo, o + 1)
            out[s - lo :] = right[s - o - 1 :]
        if lo <= o <= hi:
            out[o - lo] = 0.0
        if lo < o:
            # h_i = -(Y_{i+1} + ... + Y_o), summed from the origin leftward
            left = -np.cumsum(inc[lo + 1 - self.first : o + 1 - self.first][::-1])
            e = min(hi, o - 1)
            # left[k] is h at column o-1-k
            cols = np.arange(lo, e + 1)
            out[cols - lo] = left[o - 1 - cols]
        return out

    def rotated(self) -> "BoundaryRow":
        """Image under z -> -z: edge j maps to edge 1 - j."""
        return BoundaryRow(-self.row, 2 - self.first - self.values.size, self.values[::-1], -self.origin_x)

    def with_values(self, values: np.ndarray) -> "BoundaryRow":
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise DomainError("replacement row must have the same length")
        return BoundaryRow(self.row, self.first, values, self.origin_x)

    def edge_indices(self) -> np.ndarray:
        return np.arange(self.first, self.last + 1)


@dataclass(frozen=True, eq=False)
class Field:
    """Values over a rectangle of Z^2, stored as ``values[y - oy, x - ox]``.

    Used for last-passage values and for log partition functions.
    ``source`` is a lattice point or a short description of a boundary.
    """

    values: np.ndarray
    origin: Point
    source: object
    env_id: Optional[int] = None

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def x_range(self) -> tuple[int, int]:
        return self.origin[0], self.origin[0] + self.values.shape[1] - 1

    @property
    def y_range(self) -> tuple[int, int]:
        return self.origin[1], self.origin[1] + self.values.shape[0] - 1

    def contains(self, z: Point) -> bool:
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        return x0 <= z[0] <= x1 and y0 <= z[1] <= y1

    def value(self, z: Point) -> float:
        if not self.contains(z):
            raise DomainError(f"point {z} outside field")
        return float(self.values[z[1] - self.origin[1], z[0] - self.origin[0]])

    def row(self, y: int) -> np.ndarray:
        if not self.y_range[0] <= y <= self.y_range[1]:
            raise DomainError(f"row {y} outside field")
        return self.values[y - self.origin[1]]


PassageField = Field
LogPartitionField = Field


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """Up-right lattice path stored as a (k, 2) integer array of (x, y)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] == 0:
            raise DomainError("vertices must be a non-empty (k, 2) array")
        steps = np.diff(v, axis=0)
        ok = ((steps[:, 0] == 1) & (steps[:, 1] == 0)) | ((steps[:, 0] == 0) & (steps[:, 1] == 1))
        if not ok.all():
            raise DomainError("every step must be +e1 or +e2")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def start(self) -> Point:
        return (int(self.vertices[0, 0]), int(self.vertices[0, 1]))

    @property
    def end(self) -> Point:
        return (int(self.vertices[-1, 0]), int(self.vertices[-1, 1]))

    def points(self) -> list[Point]:
        return [(int(x), int(y)) for x, y in self.vertices]

    def edges(self) -> set[tuple[Point, Point]]:
        p = self.points()
        return set(zip(p[:-1], p[1:]))

    def weight(self, env: Environment) -> float:
        """Sum of weights in path order, matching the DP's accumulation order."""
        ox, oy = env.origin_offset
        w = env.weights[self.vertices[:, 1] - oy, self.vertices[:, 0] - ox]
        total = 0.0
        for v in w:
            total = total + float(v)
        return total

    def log_weight(self, env: Environment) -> float:
        ox, oy = env.origin_offset
        return float(np.sum(np.log(env.weights[self.vertices[:, 1] - oy, self.vertices[:, 0] - ox])))


def crossing_point_min(path: GeodesicPath, r: int) -> Point:
    """First vertex of the path on the row ``y = r`` (its minimum-l1 point there)."""
    ys = path.vertices[:, 1]
    if not ys[0] <= r <= ys[-1]:
        raise DomainError(f"row {r} outside the path's span {ys[0]}..{ys[-1]}")
    k = int(np.argmax(ys == r))
    return (int(path.vertices[k, 0]), r)
