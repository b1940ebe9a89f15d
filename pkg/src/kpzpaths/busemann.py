"""Busemann increments, exact stationary couplings, dual weights and semi-infinite paths.

Increments are stored through a potential ``phi(z) = B_{o, z}`` on a rectangle,
where ``o`` is a fixed reference vertex.  For the polymer ``phi`` is on the log
scale and the multiplicative increments are ``exp`` of its differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .env import (
    Environment,
    Exponential,
    InverseGamma,
    Point,
    RngStream,
    exp_quantile,
    invgamma_quantile,
    open_uniform,
)
from .errors import CoverageError, DomainError
from .lattice import BoundaryRow, Side
from .lpp import StationaryBoundarySpec, _check_rho, _point, characteristic_direction_lpp
from .polymer import characteristic_direction_polymer

MODELS = ("lpp", "polymer")


def _check_model(model: str) -> str:
    if model not in MODELS:
        raise DomainError(f"model must be one of {MODELS}, got {model!r}")
    return model


# ---------------------------------------------------------------------------
# the field


@dataclass(frozen=True, eq=False)
class BusemannField:
    """Busemann increments on a rectangle.

    ``I[y, x]`` is the horizontal increment into ``(x, y)`` from the left and
    ``J[y, x]`` the vertical one from below (NaN on the first column / row).
    LPP: additive B values.  Polymer: ``exp(B)``.  ``origin`` is the lattice
    point at array index ``[0, 0]``.
    """

    model: str
    rho: float
    phi: np.ndarray
    origin: Point
    provenance: str
    boundary_row: Optional[int] = None

    def __post_init__(self):
        _check_model(self.model)
        self.phi.setflags(write=False)

    @property
    def x_range(self) -> tuple[int, int]:
        return self.origin[0], self.origin[0] + self.phi.shape[1] - 1

    @property
    def y_range(self) -> tuple[int, int]:
        return self.origin[1], self.origin[1] + self.phi.shape[0] - 1

    def contains(self, z: Point) -> bool:
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        return x0 <= z[0] <= x1 and y0 <= z[1] <= y1

    def _idx(self, z: Point) -> tuple[int, int]:
        if not self.contains(z):
            raise CoverageError(f"vertex {z} outside the Busemann field")
        return z[1] - self.origin[1], z[0] - self.origin[0]

    def B(self, a: Point, b: Point) -> float:
        """B_{a,b} on the additive (log) scale."""
        return float(self.phi[self._idx(b)] - self.phi[self._idx(a)])

    def b_horizontal(self, z: Point) -> float:
        """B_{z-e1, z}."""
        return self.B((z[0] - 1, z[1]), z)

    def b_vertical(self, z: Point) -> float:
        """B_{z-e2, z}."""
        return self.B((z[0], z[1] - 1), z)

    def _scale(self, b):
        return np.exp(b) if self.model == "polymer" else b

    @property
    def I(self) -> np.ndarray:
        out = np.full(self.phi.shape, np.nan)
        out[:, 1:] = self._scale(self.phi[:, 1:] - self.phi[:, :-1])
        return out

    @property
    def J(self) -> np.ndarray:
        out = np.full(self.phi.shape, np.nan)
        out[1:, :] = self._scale(self.phi[1:, :] - self.phi[:-1, :])
        return out

    def I_at(self, z: Point) -> float:
        return float(self._scale(self.b_horizontal(z)))

    def J_at(self, z: Point) -> float:
        return float(self._scale(self.b_vertical(z)))

    def cocycle_defect(self) -> float:
        """Largest |B_{a,b} + B_{b,d} - B_{a,c} - B_{c,d}| over unit squares, from stored increments."""
        bh = self.phi[:, 1:] - self.phi[:, :-1]
        bv = self.phi[1:, :] - self.phi[:-1, :]
        lower_right = bh[:-1, :] + bv[:, 1:]
        upper_left = bv[:, :-1] + bh[1:, :]
        return float(np.max(np.abs(lower_right - upper_left))) if lower_right.size else 0.0

    def dual_weight_grid(self) -> np.ndarray:
        """Dual weights from the two incoming increments at each vertex (NaN where undefined)."""
        out = np.full(self.phi.shape, np.nan)
        b1 = self.phi[1:, 1:] - self.phi[1:, :-1]
        b2 = self.phi[1:, 1:] - self.phi[:-1, 1:]
        out[1:, 1:] = dual_weights(self.model, b1, b2)
        return out

    def primal_weight_grid(self) -> np.ndarray:
        """Weights recovered from the two outgoing increments (NaN where undefined)."""
        out = np.full(self.phi.shape, np.nan)
        b1 = self.phi[:-1, 1:] - self.phi[:-1, :-1]
        b2 = self.phi[1:, :-1] - self.phi[:-1, :-1]
        out[:-1, :-1] = dual_weights(self.model, b1, b2)
        return out


def dual_weights(model: str, b1, b2):
    """Weight implied by two increments B1, B2 sharing a vertex.

    LPP: min(B1, B2).  Polymer: 1 / (exp(-B1) + exp(-B2)).
    """
    _check_model(model)
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if model == "lpp":
        out = np.minimum(b1, b2)
    else:
        m = np.minimum(b1, b2)
        out = np.exp(m) / (np.exp(m - b1) + np.exp(m - b2))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# finite-horizon estimates


def ray_target(rho: float, model: str, x: Point, horizon: int) -> Point:
    """Lattice point at l1-distance ``horizon`` from ``x`` along xi[rho]."""
    a, b = characteristic_direction_lpp(rho) if model == "lpp" else characteristic_direction_polymer(rho)
    dx = int(round(horizon * a / (a + b)))
    return (x[0] + dx, x[1] + horizon - dx)


@dataclass(frozen=True)
class BusemannEstimate:
    horizons: tuple
    targets: tuple
    differences: np.ndarray
    max_successive_difference: float


def _backward(model, env, dst, lo):
    from .lpp import backward_passage_field
    from .polymer import backward_log_partition

    return backward_passage_field(env, dst, lo) if model == "lpp" else backward_log_partition(env, dst, lo)


def estimate_busemann(
    model: str, env: Environment, rho: float, x: Point, y: Point, horizons: Sequence[int]
) -> BusemannEstimate:
    """G_{x,u_N} - G_{y,u_N} (or the log Z analogue) for u_N on the xi[rho] ray from x.

    The differences approximate B_{x,y}; the largest change between consecutive
    horizons is reported as a convergence diagnostic, nothing more.
    """
    _check_model(model)
    rho = _check_rho(rho)
    x, y = _point(x), _point(y)
    horizons = [int(h) for h in horizons]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])) or horizons[0] < 1:
        raise DomainError("horizons must be positive and strictly increasing")
    lo = (min(x[0], y[0]), min(x[1], y[1]))
    diffs = []
    targets = []
    for h in horizons:
        u = ray_target(rho, model, x, h)
        if not env.contains(u) or not env.contains(lo):
            raise DomainError(f"horizon {h} target {u} exceeds the environment")
        if u[0] < max(x[0], y[0]) or u[1] < max(x[1], y[1]):
            raise DomainError(f"target {u} is not northeast of both points")
        f = _backward(model, env, u, lo)
        diffs.append(f.value(x) - f.value(y))
        targets.append(u)
    diffs = np.array(diffs)
    msd = float(np.max(np.abs(np.diff(diffs)))) if diffs.size > 1 else float("nan")
    return BusemannEstimate(tuple(horizons), tuple(targets), diffs, msd)


def finite_horizon_field(model: str, env: Environment, rho: float, lo: Point, hi: Point, horizon: int) -> BusemannField:
    """phi(z) = G_{lo,u} - G_{z,u} on ``lo..hi`` with u at distance ``horizon`` from ``hi``."""
    _check_model(model)
    lo, hi = _point(lo), _point(hi)
    u = ray_target(rho, model, hi, horizon)
    if not env.contains(u):
        raise DomainError(f"horizon target {u} exceeds the environment")
    f = _backward(model, env, u, lo)
    g = f.values[: hi[1] - lo[1] + 1, : hi[0] - lo[0] + 1]
    phi = g[0, 0] - g
    return BusemannField(model, rho, phi.copy(), lo, f"finite-horizon({horizon})")


# ---------------------------------------------------------------------------
# exact coupled pair


@dataclass(frozen=True, eq=False)
class CoupledPair:
    """Stationary row on y = 0 with independent bulk weights below and dual weights above.

    ``below`` covers rows ``-height_below..-1`` and ``above`` rows ``1..height_above``,
    both over the same columns.  The row potential vanishes at column 0.
    """

    model: str
    rho: float
    boundary: BoundaryRow
    uniforms: np.ndarray
    below: Environment
    above: Environment

    @property
    def columns(self) -> tuple[int, int]:
        return self.below.x_range

    def with_boundary(self, values: np.ndarray) -> "CoupledPair":
        return CoupledPair(self.model, self.rho, self.boundary.with_values(values), self.uniforms, self.below, self.above)

    def north_spec(self, window: Optional[int] = None) -> StationaryBoundarySpec:
        w = window or (self.columns[1] - self.columns[0] + 1)
        return StationaryBoundarySpec(self.rho, Side.NORTH, 0, w, self.boundary)

    def south_spec(self, window: Optional[int] = None) -> StationaryBoundarySpec:
        w = window or (self.columns[1] - self.columns[0] + 1)
        return StationaryBoundarySpec(self.rho, Side.SOUTH, 0, w, self.boundary)

    def busemann_field(self) -> BusemannField:
        """phi = B_{(0,0), z} over the whole rectangle, from the two stationary sweeps.

        Above the row: the south stationary field with the dual weights.  Below:
        minus the north stationary field, computed as a south sweep on the
        half-turned grid.  Entry from outside the columns is cut off.
        """
        lo, hi = self.columns
        log = self.model == "polymer"
        h = self.boundary.potential(lo, hi, log=log)
        sweep = K.logz_sweep if log else K.lpp_sweep
        wa = np.log(self.above.weights) if log else self.above.weights
        wb = np.log(self.below.weights) if log else self.below.weights
        up = sweep(wa, h)
        rot = np.ascontiguousarray(wb[::-1, ::-1])
        down = -sweep(rot, np.ascontiguousarray(-h[::-1]))[::-1, ::-1]
        phi = np.vstack([down, h[None, :], up])
        origin = (lo, self.below.y_range[0])
        return BusemannField(self.model, self.rho, phi, origin, "exact-row", 0)


# each column draws from its own block range of the stream, keyed by absolute position
COLUMN_BLOCK_BITS = 20
COLUMN_KEY_BIAS = 1 << 18


def column_stream(stream: RngStream, x: int) -> RngStream:
    if not -COLUMN_KEY_BIAS <= x < COLUMN_KEY_BIAS:
        raise DomainError(f"column {x} outside the keyed range")
    return stream.advanced((x + COLUMN_KEY_BIAS) << COLUMN_BLOCK_BITS)


def exact_coupled_pair(
    model: str,
    rho: float,
    width: int,
    height_below: int,
    height_above: int,
    stream: RngStream,
    x_offset: int = 0,
) -> CoupledPair:
    """Draw a stationary row on y = 0 and independent bulk grids on both sides.

    Columns are ``x_offset .. x_offset + width - 1`` and must contain 0.  Row
    increments come from shared uniforms through the Exp(rho) or Ga^{-1}(rho)
    quantile, so tilted rows can be coupled to the same uniforms.  Column x (its
    row edge and both bulk columns) is a function of ``stream`` and x alone, so a
    wider pair drawn from the same stream extends a narrower one.
    """
    _check_model(model)
    rho = _check_rho(rho)
    if min(width, height_below, height_above) < 1:
        raise DomainError("dimensions must be positive")
    if not x_offset <= 0 <= x_offset + width - 1:
        raise DomainError("the columns must contain the origin")
    hb, ha = int(height_below), int(height_above)
    u = np.empty(width)
    below = np.empty((hb, width))
    above = np.empty((ha, width))
    lpp_model = model == "lpp"
    for c in range(width):
        g = column_stream(stream, x_offset + c).generator()
        u[c] = open_uniform(g, 1)[0]
        if lpp_model:
            below[:, c] = g.standard_exponential(hb)
            above[:, c] = g.standard_exponential(ha)
        else:
            below[:, c] = open_uniform(g, hb)
            above[:, c] = open_uniform(g, ha)
    # the leftmost column's edge lies outside the pair
    u = u[1:] if width > 1 else np.array([0.5])
    if lpp_model:
        vals = exp_quantile(u, rho)
        dist = Exponential(1.0)
    else:
        vals = invgamma_quantile(u, rho)
        below = invgamma_quantile(below, 1.0)
        above = invgamma_quantile(above, 1.0)
        dist = InverseGamma(1.0)
    vals = np.atleast_1d(vals)
    row = BoundaryRow(0, x_offset + 1, vals, 0)
    env_b = Environment(below, dist, stream.master_seed, (x_offset, -hb))
    env_a = Environment(above, dist, stream.master_seed, (x_offset, 1))
    return CoupledPair(model, rho, row, np.atleast_1d(u), env_b, env_a)


# ---------------------------------------------------------------------------
# semi-infinite paths


@dataclass(frozen=True, eq=False)
class SemiInfinitePathPrefix:
    start: Point
    direction: str  # "NE" or "SW"
    vertices: np.ndarray

    def points(self) -> list[Point]:
        return [(int(a), int(b)) for a, b in self.vertices]

    def edges(self) -> list[tuple[Point, Point]]:
        p = self.points()
        return list(zip(p[:-1], p[1:]))


def forward_path_from_busemann(field: BusemannField, x: Point, steps: int, stop_row: Optional[int] = None):
    """Northeast path: step e1 iff B_{z,z+e1} <= B_{z,z+e2}.

    Stops after ``steps`` steps or on reaching ``stop_row``.
    """
    z = _point(x)
    verts = [z]
    for _ in range(int(steps)):
        if stop_row is not None and z[1] >= stop_row:
            break
        right = (z[0] + 1, z[1])
        up = (z[0], z[1] + 1)
        if field.B(z, right) <= field.B(z, up):
            z = right
        else:
            z = up
        verts.append(z)
    return SemiInfinitePathPrefix(_point(x), "NE", np.array(verts, dtype=np.int64))


def southwest_path_from_busemann(field: BusemannField, x: Point, steps: int, stop_row: Optional[int] = None):
    """Southwest path: step -e1 iff B_{z-e1,z} <= B_{z-e2,z}."""
    z = _point(x)
    verts = [z]
    for _ in range(int(steps)):
        if stop_row is not None and z[1] <= stop_row:
            break
        left = (z[0] - 1, z[1])
        down = (z[0], z[1] - 1)
        if field.B(left, z) <= field.B(down, z):
            z = left
        else:
            z = down
        verts.append(z)
    return SemiInfinitePathPrefix(_point(x), "SW", np.array(verts, dtype=np.int64))


def _kernel_pair(i_val: float, j_val: float) -> tuple[float, float]:
    if not (i_val > 0 and j_val > 0):
        raise DomainError("increments must be positive")
    p = j_val / (i_val + j_val)
    return (p, 1.0 - p)


def polymer_transition_kernels(field: BusemannField, z: Point):
    """((P(+e1), P(+e2)), (P(-e1), P(-e2))) at ``z`` for the Busemann polymer chains.

    Forward: P(+e1) = J_{z+e2} / (I_{z+e1} + J_{z+e2}).
    Southwest: P(-e1) = J_z / (I_z + J_z).
    """
    if field.model != "polymer":
        raise DomainError("transition kernels are defined for the polymer")
    z = _point(z)
    fwd = _kernel_pair(field.I_at((z[0] + 1, z[1])), field.J_at((z[0], z[1] + 1)))
    sw = _kernel_pair(field.I_at(z), field.J_at(z))
    return fwd, sw


def sample_polymer_chains(
    field: BusemannField,
    primal_start: Point,
    dual_start: Point,
    steps: int,
    stream: RngStream,
):
    """Forward chain from ``primal_start`` and southwest chain from ``dual_start``.

    Both chains read one shared uniform per unit square, indexed by its lower-left
    corner: the forward chain at z uses the square at z, the southwest chain at z
    the square at z - (1, 1).  In a square with corners a, b = a+e1, c = a+e2,
    d = a+e1+e2 the forward e1-probability at a equals the southwest
    -e1-probability at d, so the coupled chains never cross.  Each chain on its
    own has the exact Busemann kernel.
    """
    if field.model != "polymer":
        raise DomainError("chains are defined for the polymer")
    x0, x1 = field.x_range
    y0, y1 = field.y_range
    u = open_uniform(stream.generator(), field.phi.shape)

    def square_uniform(a: Point) -> float:
        if not (x0 <= a[0] <= x1 and y0 <= a[1] <= y1):
            raise CoverageError(f"square at {a} outside the field")
        return u[a[1] - y0, a[0] - x0]

    z = _point(primal_start)
    fv = [z]
    for _ in range(int(steps)):
        p1 = _forward_e1_probability(field, z)
        z = (z[0] + 1, z[1]) if square_uniform(z) <= p1 else (z[0], z[1] + 1)
        fv.append(z)
    z = _point(dual_start)
    dv = [z]
    for _ in range(int(steps)):
        pw = _kernel_pair(field.I_at(z), field.J_at(z))[0]
        z = (z[0] - 1, z[1]) if square_uniform((z[0] - 1, z[1] - 1)) <= pw else (z[0], z[1] - 1)
        dv.append(z)
    return (
        SemiInfinitePathPrefix(_point(primal_start), "NE", np.array(fv, dtype=np.int64)),
        SemiInfinitePathPrefix(_point(dual_start), "SW", np.array(dv, dtype=np.int64)),
    )


def _forward_e1_probability(field: BusemannField, z: Point) -> float:
    return _kernel_pair(field.I_at((z[0] + 1, z[1])), field.J_at((z[0], z[1] + 1)))[0]


def sample_forward_chain(field: BusemannField, x: Point, stop_row: int, stream: RngStream):
    """Forward Busemann polymer chain from ``x`` until it reaches ``stop_row``."""
    rng = stream.generator()
    z = _point(x)
    verts = [z]
    while z[1] < stop_row:
        p1 = _forward_e1_probability(field, z)
        z = (z[0] + 1, z[1]) if rng.random() < p1 else (z[0], z[1] + 1)
        verts.append(z)
    return SemiInfinitePathPrefix(_point(x), "NE", np.array(verts, dtype=np.int64))


# ---------------------------------------------------------------------------
# primal / dual crossing


@dataclass(frozen=True)
class DisjointnessResult:
    disjoint: bool
    primal_edge: Optional[tuple[Point, Point]] = None
    dual_edge: Optional[tuple[tuple[float, float], tuple[float, float]]] = None

    def __bool__(self) -> bool:
        return self.disjoint


def check_primal_dual_disjoint(primal: SemiInfinitePathPrefix, dual: SemiInfinitePathPrefix) -> DisjointnessResult:
    """Whether any primal edge crosses a dual edge after the dual path is shifted by -e*.

    ``dual`` is a southwest path on the primal lattice started at z + e*; its
    shifted vertices sit on the dual lattice.  A primal unit edge and a dual unit
    edge cross exactly when they share a midpoint, so the test compares doubled
    midpoint coordinates: p + q for primal endpoints, s + t - (1, 1) for dual ones.
    """
    pv = primal.vertices
    dv = dual.vertices
    pmid = {}
    for k in range(len(pv) - 1):
        key = (int(pv[k, 0] + pv[k + 1, 0]), int(pv[k, 1] + pv[k + 1, 1]))
        pmid.setdefault(key, k)
    for k in range(len(dv) - 1):
        key = (int(dv[k, 0] + dv[k + 1, 0] - 1), int(dv[k, 1] + dv[k + 1, 1] - 1))
        if key in pmid:
            i = pmid[key]
            pe = ((int(pv[i, 0]), int(pv[i, 1])), (int(pv[i + 1, 0]), int(pv[i + 1, 1])))
            de = (
                (dv[k, 0] - 0.5, dv[k, 1] - 0.5),
                (dv[k + 1, 0] - 0.5, dv[k + 1, 1] - 0.5),
            )
            return DisjointnessResult(False, pe, de)
    return DisjointnessResult(True)
