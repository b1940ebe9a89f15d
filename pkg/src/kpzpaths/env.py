"""Random environments, reproducible RNG streams, quantiles and special functions.

Lattice points are integer pairs ``(x, y)``.  Grids are stored row-major as
``weights[y - oy, x - ox]`` where ``(ox, oy)`` is the environment's origin offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DimensionError, DomainError, NumericError

Point = tuple[int, int]

_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class WeightDistribution:
    """Either ``Exponential(rate)`` or ``InverseGamma(shape)``."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("exponential", "inverse_gamma"):
            raise DomainError(f"unknown distribution kind {self.kind!r}")
        if not (self.param > 0 and math.isfinite(self.param)):
            raise DomainError(f"{self.kind} parameter must be positive, got {self.param}")

    @property
    def is_exponential(self) -> bool:
        return self.kind == "exponential"

    def mean(self) -> float:
        if self.is_exponential:
            return 1.0 / self.param
        if self.param <= 1:
            return math.inf
        return 1.0 / (self.param - 1.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_exponential:
            return -np.expm1(-self.param * x)
        # P(1/G <= x) = P(G >= 1/x)
        with np.errstate(divide="ignore"):
            return special.gammaincc(self.param, 1.0 / x)

    def quantile(self, u):
        if self.is_exponential:
            return exp_quantile(u, self.param)
        return invgamma_quantile(u, self.param)

    def __str__(self) -> str:
        name = "Exponential" if self.is_exponential else "InverseGamma"
        return f"{name}({self.param:g})"


def Exponential(rate: float = 1.0) -> WeightDistribution:
    return WeightDistribution("exponential", float(rate))


def InverseGamma(shape: float = 1.0) -> WeightDistribution:
    return WeightDistribution("inverse_gamma", float(shape))


# ---------------------------------------------------------------------------
# RNG streams


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by ``(master_seed, stream_id)``.

    The output is a pure function of the three fields: the Philox key is the
    128-bit concatenation of seed and stream id, and ``counter`` is the block
    counter at which generation starts.
    """

    master_seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id", "counter"):
            v = getattr(self, name)
            if not (0 <= v <= _MASK64):
                raise DomainError(f"{name} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        key = (self.master_seed & _MASK64) | ((self.stream_id & _MASK64) << 64)
        bitgen = np.random.Philox(key=key, counter=[self.counter, 0, 0, 0])
        return np.random.Generator(bitgen)

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.master_seed, stream_id, 0)

    def advanced(self, blocks: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id, self.counter + blocks)


def replica_stream(seed: int, tag: int, replica: int) -> RngStream:
    """Stream for replica ``replica`` of the experiment family ``tag``.

    Tags occupy the top 24 bits of the stream id so replica ranges never collide.
    """
    if not (0 <= tag < (1 << 24)) or not (0 <= replica < (1 << 40)):
        raise DomainError("tag or replica index out of range")
    return RngStream(seed, (tag << 40) | replica)


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms strictly inside (0, 1): midpoints of a 2^-52 grid.

    Every value is exactly representable, so neither 0 nor 1 can appear.
    """
    r = rng.random(size)
    return (np.floor(r * 2.0**52) + 0.5) * 2.0**-52


# ---------------------------------------------------------------------------
# quantiles


def _check_open_unit(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~(arr < 1.0)):
        raise DomainError("u must lie strictly inside (0, 1)")
    return arr


def _scalar_or_array(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def exp_quantile(u, rate: float = 1.0):
    arr = _check_open_unit(u)
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate}")
    return _scalar_or_array(-np.log1p(-arr) / rate, u)


def _gamma_upper_quantile(q: np.ndarray, a: float, rtol: float, max_iter: int) -> np.ndarray:
    """Solve Q(a, x) = q for x, Q the regularized upper incomplete gamma function.

    Newton on the log of whichever tail is smaller (log P = log(1-q) when q > 1/2),
    in the variable log x.  Iterates are kept inside a bracket that shrinks every
    step; a geometric bisection replaces any Newton step that leaves it.
    """
    p = 1.0 - q  # exact for q >= 1/2
    lower = q > 0.5
    target = np.log(np.where(lower, p, q))
    # Wilson-Hilferty start, small-x expansion of P where the lower tail is tiny
    z = special.ndtri(np.clip(p, 1e-300, 1 - 1e-16))
    c = 1.0 / (9.0 * a)
    x = a * np.maximum(1.0 - c + z * math.sqrt(c), 1e-3) ** 3
    small = np.exp((np.log(np.maximum(p, 1e-300)) + special.gammaln(a + 1.0)) / a)
    x = np.where((p < 0.05) & (small < x), small, x)
    x = np.where((x > 0) & np.isfinite(x), x, a)

    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    lgam = special.gammaln(a)
    done = np.zeros(x.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        for _ in range(max_iter):
            tail = np.where(lower, special.gammainc(a, x), special.gammaincc(a, x))
            resid = np.log(tail) - target
            # resid increases with x on the lower branch, decreases on the upper one
            too_small = np.where(lower, resid < 0, resid > 0)
            too_big = np.where(lower, resid > 0, resid < 0)
            lo = np.where(too_small, np.maximum(lo, x), lo)
            hi = np.where(too_big, np.minimum(hi, x), hi)
            # d log(tail) / d log x = +-x f(x) / tail
            slope = np.exp(a * np.log(x) - x - lgam) / tail
            slope = np.where(lower, slope, -slope)
            step = np.clip(-resid / slope, -5.0, 5.0)
            cand = x * np.exp(step)
            inside = (cand > lo) & (cand < hi) & np.isfinite(cand)
            bis = np.where(lo > 0, np.where(np.isfinite(hi), np.sqrt(lo * hi), lo * 4.0), hi * 0.25)
            new = np.where(inside, cand, bis)
            new = np.where(done, x, new)
            finished = (np.abs(new - x) <= rtol * new) | (resid == 0)
            x = new
            done |= finished
            if done.all():
                return x
    bad = ~done
    raise NumericError(
        "incomplete gamma inversion did not converge",
        shape=a,
        iterations=max_iter,
        unconverged=int(bad.sum()),
        first_u=float(q[bad][0]),
        last_x=float(x[bad][0]),
    )


def invgamma_quantile(u, shape: float, *, rtol: float = 1e-13, max_iter: int = 200):
    """Quantile of the inverse-gamma law with unit scale.

    ``1 / Q_Gamma(1 - u; shape)``: since ``P(1/G <= w) = Q(shape, 1/w)`` this is
    the reciprocal of the root of ``Q(shape, x) = u``.
    """
    arr = _check_open_unit(u)
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape}")
    if shape == 1.0:
        return _scalar_or_array(-1.0 / np.log(arr), u)
    if shape == 0.5:
        # Gamma(1/2) is N^2/2, so Q(1/2, x) = erfc(sqrt(x))
        return _scalar_or_array(1.0 / special.erfcinv(arr) ** 2, u)
    flat = np.atleast_1d(arr).astype(float)
    x = _gamma_upper_quantile(flat, float(shape), rtol, max_iter)
    out = (1.0 / x).reshape(np.shape(arr))
    return _scalar_or_array(out, u)


# ---------------------------------------------------------------------------
# special functions

# Bernoulli-number coefficients of the asymptotic expansions
_PSI0_COEF = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
_PSI1_COEF = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _positive_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("argument must be positive")
    return arr


def digamma(x):
    arr = _positive_array(x).copy()
    acc = np.zeros_like(arr)
    while True:
        low = arr < 8.0
        if not low.any():
            break
        acc -= np.where(low, 1.0 / arr, 0.0)
        arr = np.where(low, arr + 1.0, arr)
    inv2 = 1.0 / (arr * arr)
    series = np.zeros_like(arr)
    for c in reversed(_PSI0_COEF):
        series = (series + c) * inv2
    out = acc + np.log(arr) - 0.5 / arr - series
    return _scalar_or_array(out, x)


def trigamma(x):
    arr = _positive_array(x).copy()
    acc = np.zeros_like(arr)
    while True:
        low = arr < 8.0
        if not low.any():
            break
        acc += np.where(low, 1.0 / (arr * arr), 0.0)
        arr = np.where(low, arr + 1.0, arr)
    inv = 1.0 / arr
    inv2 = inv * inv
    series = np.zeros_like(arr)
    for c in reversed(_PSI1_COEF):
        series = (series + c) * inv2
    out = acc + inv + 0.5 * inv2 + series * inv
    return _scalar_or_array(out, x)


# ---------------------------------------------------------------------------
# environments


_env_counter = iter(range(1, 1 << 62))


@dataclass(frozen=True, eq=False)
class Environment:
    """Immutable grid of positive weights covering a window of Z^2."""

    weights: np.ndarray
    dist: WeightDistribution
    seed: int = 0
    origin_offset: Point = (0, 0)
    env_id: int = field(default_factory=lambda: next(_env_counter))

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionError(f"weights must be a non-empty 2-d grid, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise DomainError("weights must be strictly positive and finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "origin_offset", (int(self.origin_offset[0]), int(self.origin_offset[1])))

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def x_range(self) -> tuple[int, int]:
        ox = self.origin_offset[0]
        return ox, ox + self.width - 1

    @property
    def y_range(self) -> tuple[int, int]:
        oy = self.origin_offset[1]
        return oy, oy + self.height - 1

    def contains(self, z: Point) -> bool:
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        return x0 <= z[0] <= x1 and y0 <= z[1] <= y1

    def weight(self, z: Point) -> float:
        if not self.contains(z):
            raise DomainError(f"point {z} outside environment")
        ox, oy = self.origin_offset
        return float(self.weights[z[1] - oy, z[0] - ox])

    def block(self, lo: Point, hi: Point) -> np.ndarray:
        """Sub-grid covering the rectangle ``lo..hi`` (inclusive), as a view."""
        if not (self.contains(lo) and self.contains(hi)) or lo[0] > hi[0] or lo[1] > hi[1]:
            raise DomainError(f"rectangle {lo}..{hi} not inside environment")
        ox, oy = self.origin_offset
        return self.weights[lo[1] - oy : hi[1] - oy + 1, lo[0] - ox : hi[0] - ox + 1]

    def rotated_half_turn(self) -> "Environment":
        """Image under z -> -z."""
        x1 = self.x_range[1]
        y1 = self.y_range[1]
        return Environment(self.weights[::-1, ::-1], self.dist, self.seed, (-x1, -y1))


def sample_weights(shape, dist: WeightDistribution, rng: np.random.Generator) -> np.ndarray:
    if dist.is_exponential:
        return rng.standard_exponential(shape) / dist.param
    return invgamma_quantile(open_uniform(rng, shape), dist.param)


def sample_environment(
    width: int,
    height: int,
    dist: WeightDistribution,
    stream: RngStream,
    origin_offset: Point = (0, 0),
) -> Environment:
    if int(width) < 1 or int(height) < 1:
        raise DimensionError(f"dimensions must be positive, got {width}x{height}")
    w = sample_weights((int(height), int(width)), dist, stream.generator())
    return Environment(w, dist, stream.master_seed, origin_offset)


# ---------------------------------------------------------------------------
# monotone coupling


@dataclass(frozen=True)
class CoupledBoundaryRow:
    uniforms: np.ndarray
    realized: dict

    def __getitem__(self, shape: float) -> np.ndarray:
        return self.realized[float(shape)]


def couple_uniforms(uniforms: np.ndarray, shapes: Iterable[float]) -> CoupledBoundaryRow:
    shapes = [float(s) for s in shapes]
    if not shapes:
        raise DomainError("at least one shape is required")
    u = _check_open_unit(uniforms)
    realized = {}
    for s in shapes:
        arr = np.asarray(invgamma_quantile(u, s), dtype=float)
        arr.setflags(write=False)
        realized[s] = arr
    u = u.copy()
    u.setflags(write=False)
    return CoupledBoundaryRow(u, realized)


def couple_boundary(length: int, shapes: Sequence[float], stream: RngStream) -> CoupledBoundaryRow:
    """One shared uniform per site pushed through each inverse-gamma quantile."""
    if int(length) < 1:
        raise DimensionError(f"length must be positive, got {length}")
    u = open_uniform(stream.generator(), int(length))
    return couple_uniforms(u, shapes)
