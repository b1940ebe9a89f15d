"""Tilted boundary rows, Radon-Nikodym derivatives and the two-exit-time event.

Geometry: the stationary row sits on y = r with its potential anchored at
(r, r).  Boundary edges are indexed by the absolute column j of their right
endpoint, so a row stored relative to its origin (``origin_x`` standing for
column r) has relative edge index ``j - r + origin_x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .busemann import CoupledPair, exact_coupled_pair
from .env import RngStream, exp_quantile, invgamma_quantile, open_uniform, replica_stream
from .errors import CoverageError, DomainError, ParameterRangeError, WindowTooSmallError
from .lattice import BoundaryRow
from .lpp import default_window, stationary_passages
from .polymer import stationary_log_partitions
from .stats import wilson_interval

MODELS = ("lpp", "polymer")


# ---------------------------------------------------------------------------
# parameters


def _floor(x: float) -> int:
    """floor that absorbs round-off, e.g. 1000 ** (2/3) = 99.99999999999997."""
    return math.floor(x + 1e-9 * max(1.0, abs(x)))


@dataclass(frozen=True)
class TiltSpec:
    delta0: float
    t: float
    r: int
    n: int
    a1: float
    a2: float
    b1: float
    b2: float
    q1: float
    q2: float
    lam: float
    eta: float
    interval_A: tuple[int, int]
    interval_B: tuple[int, int]
    b_clipped: bool = False

    @property
    def size_A(self) -> int:
        return max(0, self.interval_A[1] - self.interval_A[0] + 1)

    @property
    def size_B(self) -> int:
        return max(0, self.interval_B[1] - self.interval_B[0] + 1)

    def relative(self, interval: tuple[int, int]) -> tuple[int, int]:
        return (interval[0] - self.r, interval[1] - self.r)

    @property
    def d1_interval(self) -> tuple[int, int]:
        """Admissible range of tau_{0,r} - r."""
        s = self.t * self.r ** (2.0 / 3.0)
        return (_floor(self.a1 * s), _floor(self.a2 * s))

    @property
    def d2_threshold(self) -> int:
        """Lower bound on tau_{r,n} - r."""
        return _floor(self.b1 * self.t * (self.n - self.r) ** (2.0 / 3.0))


def tilt_parameters(delta0: float, t: float, r: int, n: int, r0: int = 1) -> TiltSpec:
    """Tilt schedule for given delta0, t and the row r between 0 and n.

    When the raw B interval reaches into A it is shifted to start right after A
    (``b_clipped`` records this); intervals then never overlap.
    """
    delta0 = float(delta0)
    t = float(t)
    r, n = int(r), int(n)
    if not 0.0 < delta0 <= 0.04:
        raise DomainError(f"delta0 must lie in (0, 0.04], got {delta0}")
    if t < 1.0:
        raise DomainError(f"t must be at least 1, got {t}")
    if not (r0 <= r and 2 * r <= n):
        raise DomainError(f"need {r0} <= r <= n/2, got r={r}, n={n}")
    a1, a2 = delta0, 100.0 * delta0
    sq = math.sqrt(delta0)
    b1, b2 = sq, 100.0 * sq
    q1, q2 = delta0, sq
    lam = 0.5 + q1 * t * r ** (-1.0 / 3.0)
    eta = 0.5 - q2 * t * (n - r) ** (-1.0 / 3.0)
    for name, v in (("lambda", lam), ("eta", eta)):
        if not 1.0 / 3.0 <= v <= 2.0 / 3.0:
            raise ParameterRangeError(f"{name} = {v:.6g} outside [1/3, 2/3]")
    sr = t * r ** (2.0 / 3.0)
    sn = t * (n - r) ** (2.0 / 3.0)
    A = (r + _floor(a1 * sr) + 1, r + _floor(a2 * sr))
    B = (r + _floor(b1 * sn) + 1, r + _floor(b2 * sn))
    clipped = False
    if A[1] >= A[0] and B[0] <= A[1]:
        B = (A[1] + 1, B[1])
        clipped = True
    if B[0] > B[1]:
        raise ParameterRangeError(f"interval B is empty after ordering: {B}")
    return TiltSpec(delta0, t, r, n, a1, a2, b1, b2, q1, q2, lam, eta, A, B, clipped)


# ---------------------------------------------------------------------------
# tilted rows


@dataclass(frozen=True, eq=False)
class TiltedBoundary:
    original: BoundaryRow
    tilted: BoundaryRow
    spec: TiltSpec
    model: str


def _rel_slices(row: BoundaryRow, spec: TiltSpec):
    """Array slices of ``row.values`` covering intervals A and B."""
    out = []
    for lo, hi in (spec.interval_A, spec.interval_B):
        if hi < lo:
            out.append(slice(0, 0))
            continue
        a = lo - spec.r + row.origin_x
        b = hi - spec.r + row.origin_x
        if a < row.first or b > row.last:
            raise CoverageError(f"row edges {row.first}..{row.last} do not cover [{a}, {b}]")
        out.append(slice(a - row.first, b - row.first + 1))
    return out


def tilt_boundary(model: str, row: BoundaryRow, spec: TiltSpec, uniforms: Optional[np.ndarray] = None) -> TiltedBoundary:
    """Lower the row on A (parameter lambda) and raise it on B (parameter eta).

    LPP: exact rescaling by (1/2)/lambda and (1/2)/eta.  Polymer: the same
    uniforms that produced the Ga^{-1}(1/2) row are pushed through the
    Ga^{-1}(lambda) and Ga^{-1}(eta) quantiles, which keeps the sitewise order.
    """
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    sa, sb = _rel_slices(row, spec)
    vals = row.values.copy()
    if model == "lpp":
        vals[sa] = (0.5 / spec.lam) * vals[sa]
        vals[sb] = (0.5 / spec.eta) * vals[sb]
    else:
        if uniforms is None:
            raise DomainError("the polymer tilt needs the row's uniforms")
        u = np.asarray(uniforms, dtype=float)
        if u.shape != vals.shape:
            raise DomainError("uniforms must match the row length")
        if vals[sa].size:
            vals[sa] = invgamma_quantile(u[sa], spec.lam)
        if vals[sb].size:
            vals[sb] = invgamma_quantile(u[sb], spec.eta)
    return TiltedBoundary(row, row.with_values(vals), spec, model)


# ---------------------------------------------------------------------------
# Radon-Nikodym derivatives


def log_rn_exp(xa: np.ndarray, xb: np.ndarray, lam: float, eta: float):
    """log of prod_A lam e^{-lam x} / (e^{-x/2}/2) * prod_B (same with eta); vectorised over the last axis."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    la = xa.shape[-1] * math.log(2.0 * lam) - (lam - 0.5) * xa.sum(axis=-1)
    lb = xb.shape[-1] * math.log(2.0 * eta) - (eta - 0.5) * xb.sum(axis=-1)
    return la + lb


def log_rn_invgamma(xa: np.ndarray, xb: np.ndarray, lam: float, eta: float):
    """Inverse-gamma analogue of :func:`log_rn_exp`: ratio Gamma(1/2)/Gamma(s) x^{1/2-s} per site."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    g = special.gammaln(0.5)
    la = xa.shape[-1] * (g - special.gammaln(lam)) - (lam - 0.5) * np.log(xa).sum(axis=-1)
    lb = xb.shape[-1] * (g - special.gammaln(eta)) - (eta - 0.5) * np.log(xb).sum(axis=-1)
    return la + lb


def rn_derivative_exp(row: BoundaryRow, spec: TiltSpec) -> float:
    sa, sb = _rel_slices(row, spec)
    return float(math.exp(log_rn_exp(row.values[sa], row.values[sb], spec.lam, spec.eta)))


def rn_derivative_invgamma(row: BoundaryRow, spec: TiltSpec) -> float:
    sa, sb = _rel_slices(row, spec)
    return float(math.exp(log_rn_invgamma(row.values[sa], row.values[sb], spec.lam, spec.eta)))


def _exp_factor(s: float) -> float:
    den = 0.5 * (2.0 * s - 0.5)
    if not den > 0:
        raise DomainError(f"second moment infinite for parameter {s}")
    return s * s / den


def rn_second_moment_closed_form(spec: TiltSpec) -> float:
    """E[f^2] for the exponential tilt: product of lam^2 / ((1/2)(2 lam - 1/2)) over A, likewise eta over B."""
    return _exp_factor(spec.lam) ** spec.size_A * _exp_factor(spec.eta) ** spec.size_B


def _invgamma_factor_log(s: float) -> float:
    if not 2.0 * s - 0.5 > 0:
        raise DomainError(f"second moment infinite for parameter {s}")
    return float(special.gammaln(0.5) + special.gammaln(2.0 * s - 0.5) - 2.0 * special.gammaln(s))


def rn_second_moment_invgamma(spec: TiltSpec) -> float:
    """E[f^2] for the inverse-gamma tilt: Gamma(1/2) Gamma(2s - 1/2) / Gamma(s)^2 per site."""
    return math.exp(spec.size_A * _invgamma_factor_log(spec.lam) + spec.size_B * _invgamma_factor_log(spec.eta))


@dataclass(frozen=True)
class RnReport:
    model: str
    values: np.ndarray
    mean_f: float
    se_f: float
    mean_f2: float
    se_f2: float
    closed_form_f2: float
    fitted_C: float

    @property
    def relative_error_f2(self) -> float:
        return self.mean_f2 / self.closed_form_f2 - 1.0


def rn_monte_carlo(model: str, spec: TiltSpec, replicas: int, seed: int, chunk: int = 10_000, tag: int = 70) -> RnReport:
    """Sample untilted rows on A and B and evaluate f; deterministic in (seed, chunk)."""
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    na, nb = spec.size_A, spec.size_B
    out = np.empty(int(replicas))
    for c0 in range(0, int(replicas), chunk):
        m = min(chunk, int(replicas) - c0)
        rng = replica_stream(seed, tag, c0 // chunk).generator()
        u = open_uniform(rng, (m, na + nb))
        if model == "lpp":
            x = exp_quantile(u, 0.5)
            lf = log_rn_exp(x[:, :na], x[:, na:], spec.lam, spec.eta)
        else:
            x = invgamma_quantile(u, 0.5)
            lf = log_rn_invgamma(x[:, :na], x[:, na:], spec.lam, spec.eta)
        out[c0 : c0 + m] = np.exp(lf)
    f2 = out * out
    n = out.size
    closed = rn_second_moment_closed_form(spec) if model == "lpp" else rn_second_moment_invgamma(spec)
    dl2 = spec.size_A * (spec.lam - 0.5) ** 2 + spec.size_B * (spec.eta - 0.5) ** 2
    m2 = float(f2.mean())
    fitted = math.log(m2) / dl2 if dl2 > 0 and m2 > 0 else float("nan")
    return RnReport(
        model,
        out,
        float(out.mean()),
        float(out.std(ddof=1) / math.sqrt(n)),
        m2,
        float(f2.std(ddof=1) / math.sqrt(n)),
        closed,
        fitted,
    )


# ---------------------------------------------------------------------------
# event D


@dataclass(frozen=True)
class EventDReplica:
    d1: bool
    d2: bool
    d1_tilted: bool
    d2_tilted: bool
    f: float
    tau_north: float
    tau_south: float
    tau_north_tilted: float
    tau_south_tilted: float
    retries: int = 0


@dataclass(frozen=True)
class EventDReport:
    model: str
    spec: TiltSpec
    replicas: int
    counts: dict
    mean_f2: float
    importance_estimate: float
    mass_threshold: float
    raw: list = field(repr=False, default_factory=list)

    def frequency(self, key: str) -> float:
        return self.counts[key] / self.replicas

    def interval(self, key: str) -> tuple[float, float]:
        return wilson_interval(self.counts[key], self.replicas)

    @property
    def cauchy_schwarz_gap(self) -> float:
        """P(D) E[f^2] - Ptilde(D)^2; nonnegative when the inequality holds empirically."""
        return self.frequency("D") * self.mean_f2 - self.frequency("D_tilted") ** 2

    @property
    def cauchy_schwarz_holds(self) -> bool:
        return self.cauchy_schwarz_gap >= 0.0


def event_geometry(spec: TiltSpec, scale: int = 1):
    """Column range and window half-widths (relative to the row origin) for one replica.

    Windows are widened so that the tilted exits, pushed into A and B, stay inside;
    ``scale`` multiplies the base windows on a retry.
    """
    r, n = spec.r, spec.n
    wn = scale * default_window(r) + max(0, spec.interval_A[1] - r)
    ws = scale * default_window(n + 1 - r) + max(0, spec.interval_B[1] - r)
    w = max(wn, ws)
    lo = min(-r, -w - 2)
    hi = max(w + 1, n - r)
    return lo, hi, wn, ws


# retries double the windows at most this many times
MAX_DOUBLINGS = 6


def event_D_replica(model: str, spec: TiltSpec, stream: RngStream, mass_threshold: float = 0.5) -> EventDReplica:
    """One coupled sample of the two exit events, untilted and tilted.

    If an exit reaches a window edge the windows double; the wider pair extends the
    same sample column by column, so the answer is that of one larger sample.
    """
    retries = 0
    while True:
        try:
            return _event_D_once(model, spec, stream, mass_threshold, retries)
        except WindowTooSmallError:
            if retries >= MAX_DOUBLINGS:
                raise
            retries += 1


def _event_D_once(model, spec, stream, mass_threshold, retries) -> EventDReplica:
    r, n = spec.r, spec.n
    lo, hi, wn, ws = event_geometry(spec, 1 << retries)
    pair = exact_coupled_pair(model, 0.5, hi - lo + 1, r, n + 1 - r, stream, x_offset=lo)
    tb = tilt_boundary(model, pair.boundary, spec, pair.uniforms)
    rows = [pair.boundary, tb.tilted]
    sa, sb = _rel_slices(pair.boundary, spec)
    v = pair.boundary.values
    if model == "lpp":
        f = math.exp(log_rn_exp(v[sa], v[sb], spec.lam, spec.eta))
    else:
        f = math.exp(log_rn_invgamma(v[sa], v[sb], spec.lam, spec.eta))
    d1lo, d1hi = spec.d1_interval
    d2lo = spec.d2_threshold
    src = (-r, -r)
    dst = (n - r, n + 1 - r)
    if model == "lpp":
        north = stationary_passages(pair.below, pair.north_spec(wn), src, rows)
        south = stationary_passages(pair.above, pair.south_spec(ws), dst, rows)
        tn = [rec.exit_index for rec in north]
        ts = [rec.exit_index for rec in south]
        e1 = [d1lo <= k <= d1hi for k in tn]
        e2 = [k >= d2lo for k in ts]
    else:
        north = stationary_log_partitions(pair.below, pair.north_spec(wn), src, rows)
        south = stationary_log_partitions(pair.above, pair.south_spec(ws), dst, rows)
        m1 = [res.mass_in(d1lo, d1hi) for res in north]
        m2 = [res.mass_in(d2lo, 10**9) for res in south]
        tn = m1
        ts = m2
        e1 = [m >= mass_threshold for m in m1]
        e2 = [m >= mass_threshold for m in m2]
    return EventDReplica(e1[0], e2[0], e1[1], e2[1], f, tn[0], ts[0], tn[1], ts[1], retries)


def summarize_event_D(model: str, spec: TiltSpec, reps: list, mass_threshold: float) -> EventDReport:
    keys = ("D1", "D2", "D", "D1_tilted", "D2_tilted", "D_tilted")
    counts = dict.fromkeys(keys, 0)
    f = np.array([x.f for x in reps])
    ind_d = np.array([x.d1 and x.d2 for x in reps], dtype=float)
    for x in reps:
        counts["D1"] += x.d1
        counts["D2"] += x.d2
        counts["D"] += x.d1 and x.d2
        counts["D1_tilted"] += x.d1_tilted
        counts["D2_tilted"] += x.d2_tilted
        counts["D_tilted"] += x.d1_tilted and x.d2_tilted
    return EventDReport(
        model,
        spec,
        len(reps),
        {k: int(v) for k, v in counts.items()},
        float(np.mean(f * f)),
        float(np.mean(ind_d * f)),
        mass_threshold,
        list(reps),
    )


def event_D_experiment(
    model: str, spec: TiltSpec, replicas: int, seed: int, mass_threshold: float = 0.5, tag: int = 71
) -> EventDReport:
    """Frequencies of D1, D2 and D under the stationary row and under the tilted row.

    LPP: D1 = {tau_{0,r} - r in [floor(a1 t r^{2/3}), floor(a2 t r^{2/3})]} for the
    north model from (0,0) to (r,r); D2 = {tau_{r,n} - r >= floor(b1 t (n-r)^{2/3})}
    for the south model from (r,r) to (n,n+1).  Polymer: the quenched masses of
    those exit ranges must reach ``mass_threshold``.
    """
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    if not 0.0 < mass_threshold <= 1.0:
        raise DomainError("mass threshold must lie in (0, 1]")
    reps = [
        event_D_replica(model, spec, replica_stream(seed, tag, i), mass_threshold) for i in range(int(replicas))
    ]
    return summarize_event_D(model, spec, reps, mass_threshold)
