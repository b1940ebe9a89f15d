"""Monte Carlo experiments.  Each replica draws from its own counter-based stream
and results are reduced in replica order, so output does not depend on the
thread count."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import lpp, polymer
from ..busemann import (
    check_primal_dual_disjoint,
    exact_coupled_pair,
    forward_path_from_busemann,
    sample_polymer_chains,
    southwest_path_from_busemann,
)
from ..env import (
    Environment,
    Exponential,
    InverseGamma,
    RngStream,
    exp_quantile,
    invgamma_quantile,
    open_uniform,
    replica_stream,
    sample_environment,
    sample_weights,
)
from ..errors import CoverageError, KpzError, WindowTooSmallError
from ..lattice import BoundaryRow, Side
from ..stats import TailCurve, fit_power_law, ks_test, loglog_slope, mean_and_se, wilson_interval
from ..tilt import (
    event_D_experiment,
    rn_monte_carlo,
    rn_second_moment_closed_form,
    rn_second_moment_invgamma,
    tilt_parameters,
)
from .config import ExperimentConfig
from .report import StatReport
from .tolerances import TOLERANCES

# stream families; a tag is family * 256 + a small index
TAG_TAIL_LPP = 1
TAG_TAIL_POLYMER = 2
TAG_STATIONARY_MEAN = 10
TAG_STATIONARY_KS = 11
TAG_STATIONARY_VAR = 12
TAG_EXIT = 20
TAG_EXIT_MEDIAN = 21
TAG_DUALITY = 30
TAG_RN = 40
TAG_EVENT_D = 41

MAX_DOUBLINGS = 8


def _tag(family: int, index: int = 0) -> int:
    return family * 256 + index


def map_replicas(fn: Callable[[int], object], count: int, threads: int = 1, chunk: int = 32) -> list:
    """``[fn(0), ..., fn(count - 1)]``, computed on ``threads`` workers."""
    if threads <= 1 or count <= chunk:
        return [fn(i) for i in range(count)]
    ranges = [range(a, min(a + chunk, count)) for a in range(0, count, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda rg: [fn(i) for i in rg], ranges))
    return [x for part in parts for x in part]


def _dist(model: str):
    return Exponential(1.0) if model == "lpp" else InverseGamma(1.0)


def _row_values(model: str, u: np.ndarray, rho: float) -> np.ndarray:
    return exp_quantile(u, rho) if model == "lpp" else invgamma_quantile(u, rho)


def characteristic_slope(model: str, rho: float) -> float:
    a, b = lpp.characteristic_direction_lpp(rho) if model == "lpp" else polymer.characteristic_direction_polymer(rho)
    return a / b


def characteristic_exit(model: str, rho: float, m: int, n: int) -> float:
    """Column where the ray from (m, n) in direction -xi[rho] meets the boundary row."""
    return m - n * characteristic_slope(model, rho)


# ---------------------------------------------------------------------------
# stationary samples with window growth


@dataclass(frozen=True)
class StationarySample:
    value: float
    exit: float
    retries: int
    columns: Optional[np.ndarray] = None
    exit_distribution: Optional[np.ndarray] = None


def stationary_sample(
    model: str, rho: float, m: int, n: int, stream: RngStream, window: Optional[int] = None
) -> StationarySample:
    """G^rho or log Z^rho from the row origin (0, 0) to (m, n) with the row on y = 0.

    The grid starts ``window`` columns left of the characteristic exit.  When the
    answer touches the left truncation edge the grid is extended further left with
    fresh columns from a disjoint block of the same stream, so the original columns
    are reused and the result is that of one larger sample.
    """
    w = int(window or lpp.default_window(n))
    centre = int(round(m - n * characteristic_slope(model, rho)))
    dist = _dist(model)
    hi = m
    lo = min(centre - w, 0)
    rng = stream.generator()
    vals = _row_values(model, open_uniform(rng, hi - lo), rho)
    bulk = sample_weights((n, hi - lo + 1), dist, rng)
    retries = 0
    while True:
        row = BoundaryRow(0, lo + 1, vals, 0)
        env = Environment(bulk, dist, stream.master_seed, (lo, 1))
        spec = lpp.StationaryBoundarySpec(rho, Side.SOUTH, 0, w, row)
        try:
            if model == "lpp":
                rec = lpp.stationary_passage(env, spec, (m, n))
                return StationarySample(rec.value, float(rec.exit_index), retries)
            res = polymer.stationary_log_partition(env, spec, (m, n))
            return StationarySample(res.value, res.mean_exit, retries, res.columns, res.exit_distribution)
        except WindowTooSmallError:
            if retries >= MAX_DOUBLINGS:
                raise
            retries += 1
            w *= 2
            new_lo = min(centre - w, lo)
            extra = lo - new_lo
            g = stream.advanced(retries << 40).generator()
            vals = np.concatenate([_row_values(model, open_uniform(g, extra), rho), vals])
            bulk = np.concatenate([sample_weights((n, extra), dist, g), bulk], axis=1)
            lo = new_lo


def stationary_row_increments(model: str, rho: float, level: int, width: int, stream: RngStream) -> np.ndarray:
    """Horizontal increments (ratios for the polymer) on row ``level`` of a stationary
    model over columns 0..width-1, right half only so the left cut-off is far away."""
    dist = _dist(model)
    rng = stream.generator()
    vals = _row_values(model, open_uniform(rng, width - 1), rho)
    bulk = sample_weights((level, width), dist, rng)
    env = Environment(bulk, dist, stream.master_seed, (0, 1))
    row = BoundaryRow(0, 1, vals, 0)
    if model == "lpp":
        top = lpp.stationary_passage_field(env, row, (0, width - 1), level).row(level)
        inc = np.diff(top)
    else:
        top = polymer.stationary_log_partition_field(env, row, (0, width - 1), level).row(level)
        inc = np.exp(np.diff(top))
    return inc[width // 2 :]


# ---------------------------------------------------------------------------
# tail experiments


@dataclass(frozen=True)
class TailResult:
    config: ExperimentConfig
    curve: TailCurve
    tube: Optional[TailCurve] = None
    inner: dict = field(default_factory=dict)
    runtime: float = 0.0


def _threshold(r: int, t: float, a: float = 1.0) -> float:
    """Deviation a t r^{2/3}; ``a`` is the free constant in front, a config knob."""
    return a * t * r ** (2.0 / 3.0)


def run_tail_experiment_lpp(config: ExperimentConfig) -> TailResult:
    """P(first entry of the (0,0)-(n,n) geodesic into row r lies >= a t r^{2/3} right of r).

    The one-sided tube event, some vertex at or below row r with x - y >= t r^{2/3},
    is recorded alongside for context.
    """
    config.validate()
    n, r, a = config.n, config.row, config.deviation_constant
    t0 = time.perf_counter()

    def one(i: int):
        env = sample_environment(n + 1, n + 1, Exponential(1.0), replica_stream(config.seed, _tag(TAG_TAIL_LPP), i))
        return lpp.geodesic_row_entry(env, (0, 0), (n, n), r)

    out = np.array(map_replicas(one, config.replicas, config.threads), dtype=float)
    dev, exc = out[:, 0] - r, out[:, 1]
    ts = np.array(config.t_grid, dtype=float)
    mid = [int(np.count_nonzero(dev >= _threshold(r, t, a))) for t in ts]
    tube = [int(np.count_nonzero(exc >= _threshold(r, t, a))) for t in ts]
    N = config.replicas
    return TailResult(
        config,
        TailCurve.from_counts(ts, mid, [N] * len(ts)),
        TailCurve.from_counts(ts, tube, [N] * len(ts)),
        runtime=time.perf_counter() - t0,
    )


def run_tail_experiment_polymer(config: ExperimentConfig) -> TailResult:
    """Quenched probability q(t) that the polymer's first vertex on row r lies >= a t r^{2/3}
    right of r; reports E[q] and P(q >= 1 - eps)."""
    config.validate()
    n, r = config.n, config.row
    ts = np.array(config.t_grid, dtype=float)
    cuts = np.array([math.ceil(r + _threshold(r, t, config.deviation_constant)) for t in ts])
    t0 = time.perf_counter()

    def one(i: int):
        rng = replica_stream(config.seed, _tag(TAG_TAIL_POLYMER), i).generator()
        e = rng.standard_exponential((n + 1, n + 1))
        mass, _ = polymer.first_entry_mass_fast(e, r)
        tail = np.cumsum(mass[::-1])[::-1]
        return np.array([tail[c] if c <= n else 0.0 for c in cuts])

    q = np.array(map_replicas(one, config.replicas, config.threads), dtype=float).reshape(-1, len(ts))
    q = np.clip(q, 0.0, 1.0)
    N = config.replicas
    means = q.mean(axis=0)
    ses = q.std(axis=0, ddof=1) / math.sqrt(N) if N > 1 else np.zeros_like(means)
    inner = {}
    for eps in config.epsilons:
        cnt = [int(np.count_nonzero(q[:, k] >= 1.0 - eps)) for k in range(len(ts))]
        inner[float(eps)] = TailCurve.from_counts(ts, cnt, [N] * len(ts))
    return TailResult(config, TailCurve.from_means(ts, means, ses, N), None, inner, time.perf_counter() - t0)


def _curve_stats(rep: StatReport, prefix: str, curve: TailCurve) -> None:
    ci = curve.intervals()
    for k, t in enumerate(curve.t):
        rep.add(f"{prefix}(t={t:g})", curve.p[k], tuple(ci[k]), int(curve.trials[k]))


def tail_report(result: TailResult) -> StatReport:
    cfg = result.config
    rep = StatReport(cfg.experiment, cfg.seed, config=cfg.to_dict())
    rep.runtime = result.runtime
    main = "p_mid" if cfg.experiment == "tail-lpp" else "mean_q"
    _curve_stats(rep, main, result.curve)
    if result.tube is not None:
        _curve_stats(rep, "p_tube", result.tube)
    for eps, c in result.inner.items():
        _curve_stats(rep, f"p_q_ge_{1 - eps:g}", c)
    positive = bool(np.all(result.curve.p > 0))
    rep.check(f"{main}_positive", positive, f"min p = {result.curve.p.min():.3g}")
    viol = result.curve.monotonicity_violations()
    rep.check(f"{main}_monotone", not viol, f"violations at t indices {viol}" if viol else "")
    lo, hi = TOLERANCES["tail_slope"]
    try:
        fit = fit_power_law(result.curve)
        rep.add("fit_slope", fit.slope, fit.ci, cfg.replicas)
        rep.add("fit_intercept", fit.intercept, (fit.intercept - 1.96 * fit.intercept_se, fit.intercept + 1.96 * fit.intercept_se))
        rep.add("fit_r_squared", fit.r_squared)
        rep.check("tail_slope_in_range", lo <= fit.slope <= hi, f"slope {fit.slope:.4f}, band [{lo}, {hi}]")
    except KpzError as exc:
        rep.check("tail_slope_in_range", False, f"fit failed: {exc}")
    return rep


# ---------------------------------------------------------------------------
# stationary validation


def _mean_check(rep, name, values, expected, n_rep):
    m, se = mean_and_se(values)
    k = TOLERANCES["mean_se_multiple"]
    rep.add(f"{name}_mean", m, (m - k * se, m + k * se), n_rep)
    rep.add(f"{name}_expected", expected)
    rep.check(f"{name}_mean_within_{k:g}se", abs(m - expected) <= k * se, f"mean {m:.4f}, expected {expected:.4f}, se {se:.4f}")


def run_stationary_validation(config: ExperimentConfig) -> StatReport:
    """Mean of G^rho / log Z^rho against the exact expectation, KS of row increments and
    the n^{2/3} variance scaling, for each selected model."""
    config.validate()
    t0 = time.perf_counter()
    rep = StatReport(config.experiment, config.seed, config=config.to_dict())
    retries = 0
    for mi, model in enumerate(config.models):
        rho = config.rho
        n = config.n if model == "lpp" else config.polymer_n
        fam = _tag(TAG_STATIONARY_MEAN, mi)
        t_mean = time.perf_counter()
        samples = map_replicas(
            lambda i: stationary_sample(model, rho, n, n, replica_stream(config.seed, fam, i), config.window),
            config.replicas,
            config.threads,
        )
        retries += sum(s.retries for s in samples)
        expected = lpp.expected_stationary_G(rho, n, n) if model == "lpp" else polymer.expected_stationary_logZ(rho, n, n)
        _mean_check(rep, f"{model}_n{n}", [s.value for s in samples], expected, config.replicas)
        rep.timings[f"{model}_mean"] = time.perf_counter() - t_mean

        for k, rh in enumerate(config.rho_grid):
            fam = _tag(TAG_STATIONARY_KS, 16 * mi + k)
            inc = np.concatenate(
                map_replicas(
                    lambda i: stationary_row_increments(
                        model, rh, config.increment_level, 400, replica_stream(config.seed, fam, i)
                    ),
                    config.aux_replicas,
                    config.threads,
                )
            )
            cdf = Exponential(rh).cdf if model == "lpp" else InverseGamma(rh).cdf
            stat, p = ks_test(inc, cdf)
            name = f"{model}_increments_rho{rh:g}"
            rep.add(f"{name}_ks_p", p, n_replicas=config.aux_replicas)
            rep.add(f"{name}_ks_stat", stat, n_replicas=config.aux_replicas)
            rep.check(f"{name}_ks", p > TOLERANCES["ks_p_min"], f"p = {p:.4g} over {inc.size} increments")

        ratios, variances = [], []
        for k, size in enumerate(config.n_grid):
            m = int(round(size * characteristic_slope(model, rho)))
            fam = _tag(TAG_STATIONARY_VAR, 16 * mi + k)
            vs = map_replicas(
                lambda i: stationary_sample(model, rho, m, size, replica_stream(config.seed, fam, i), config.window),
                config.variance_replicas,
                config.threads,
            )
            retries += sum(s.retries for s in vs)
            x = np.array([s.value for s in vs])
            var = float(x.var(ddof=1))
            # normal-theory interval for a variance
            half = 1.96 * var * math.sqrt(2.0 / (x.size - 1))
            variances.append(var)
            ratios.append(var / size ** (2.0 / 3.0))
            rep.add(f"{model}_var_n{size}", var, (var - half, var + half), x.size)
            rep.add(f"{model}_var_over_n23_n{size}", ratios[-1], n_replicas=x.size)
        band = max(ratios) / min(ratios)
        rep.add(f"{model}_variance_band_ratio", band)
        rep.check(
            f"{model}_variance_band",
            band <= TOLERANCES["variance_band_factor"],
            f"max/min of Var/n^(2/3) = {band:.3f}",
        )
        slope = loglog_slope(config.n_grid, variances)
        lo, hi = TOLERANCES["variance_slope"]
        rep.add(f"{model}_variance_loglog_slope", slope)
        rep.check(f"{model}_variance_slope", lo <= slope <= hi, f"slope {slope:.4f}, band [{lo}, {hi}]")
    rep.notes["window_retries"] = retries
    rep.runtime = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# exit concentration


def run_exit_concentration(config: ExperimentConfig) -> StatReport:
    """Tail of |exit - u^rho| / n^{2/3} for the stationary model from (0,0) to (n,n);
    for the polymer, the mean quenched mass outside u^rho +- t n^{2/3}."""
    config.validate()
    t0 = time.perf_counter()
    n, rho = config.n, config.rho
    scale = n ** (2.0 / 3.0)
    rep = StatReport(config.experiment, config.seed, config=config.to_dict())
    retries = 0
    for mi, model in enumerate(config.models):
        u = characteristic_exit(model, rho, n, n)
        rep.add(f"{model}_u_rho", u)
        fam = _tag(TAG_EXIT, mi)
        ss = map_replicas(
            lambda i: stationary_sample(model, rho, n, n, replica_stream(config.seed, fam, i), config.window),
            config.replicas,
            config.threads,
        )
        retries += sum(s.retries for s in ss)
        N = len(ss)
        ts = np.array(config.t_grid, dtype=float)
        if model == "lpp":
            dev = np.abs(np.array([s.exit for s in ss]) - u)
            cnt = [int(np.count_nonzero(dev > t * scale)) for t in ts]
            curve = TailCurve.from_counts(ts, cnt, [N] * len(ts))
            name = "lpp_exit_tail"
        else:
            outside = np.array(
                [[s.exit_distribution[np.abs(s.columns - u) > t * scale].sum() for t in ts] for s in ss]
            )
            se = outside.std(axis=0, ddof=1) / math.sqrt(N)
            curve = TailCurve.from_means(ts, outside.mean(axis=0), se, N)
            name = "polymer_mass_outside"
            # inner mass >= 1 - exp(-C1 t^2 n^{1/3}): per-replica rate, median and quartiles
            for k, t in enumerate(ts):
                if t > 0:
                    rate = -np.log(np.maximum(outside[:, k], 1e-300)) / (t * t * n ** (1.0 / 3.0))
                    q1, med, q3 = np.quantile(rate, [0.25, 0.5, 0.75])
                    rep.add(f"polymer_inner_decay_rate(t={t:g})", med, (q1, q3), N)
        _curve_stats(rep, name, curve)
        viol = curve.monotonicity_violations()
        rep.check(f"{name}_monotone", not viol, f"violations at {viol}" if viol else "")
        tt = TOLERANCES["exit_tail_t"]
        if tt in config.t_grid:
            k = list(config.t_grid).index(tt)
            rep.check(
                f"{name}_below_{TOLERANCES['exit_tail_max']:g}_at_t{tt:g}",
                curve.p[k] < TOLERANCES["exit_tail_max"],
                f"{curve.p[k]:.4g}",
            )
        for k, rh in enumerate(config.rho_grid):
            uk = characteristic_exit(model, rh, n, n)
            famk = _tag(TAG_EXIT_MEDIAN, 16 * mi + k)
            sk = map_replicas(
                lambda i: stationary_sample(model, rh, n, n, replica_stream(config.seed, famk, i), config.window),
                config.aux_replicas,
                config.threads,
            )
            retries += sum(s.retries for s in sk)
            med = float(np.median([s.exit for s in sk]))
            rep.add(f"{model}_median_exit_rho{rh:g}", med, n_replicas=len(sk))
            band = TOLERANCES["exit_median_band"] * scale
            rep.check(
                f"{model}_median_exit_centred_rho{rh:g}",
                abs(med - uk) <= band,
                f"median {med:.2f}, u {uk:.2f}, band {band:.2f}",
            )
    rep.notes["window_retries"] = retries
    rep.runtime = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Busemann duality


@dataclass(frozen=True)
class DualityReplica:
    cocycle: float
    north_match: bool
    south_match: bool
    disjoint: bool
    I_row: np.ndarray
    J_col: np.ndarray
    dual_row: np.ndarray
    retries: int = 0


def duality_replica(model: str, rho: float, L: int, stream: RngStream) -> DualityReplica:
    """One exact coupled pair with L rows on each side of the row y = 0.

    When a geodesic or path reaches the side of the rectangle the padding doubles;
    the wider pair extends the same sample column by column.
    """
    pad = lpp.default_window(L) + 2
    retries = 0
    while True:
        try:
            return _duality_once(model, rho, L, stream, pad, retries)
        except (WindowTooSmallError, CoverageError):
            if retries >= MAX_DOUBLINGS:
                raise
            retries += 1
            pad *= 2


def _duality_once(model: str, rho: float, L: int, stream: RngStream, pad: int, retries: int) -> DualityReplica:
    s = characteristic_slope(model, rho)
    span = int(math.ceil(L * s))
    x_lo = -pad
    width = span + 2 * pad + 1
    pair = exact_coupled_pair(model, rho, width, L, L, stream, x_offset=x_lo)
    f = pair.busemann_field()
    north = south = True
    if model == "lpp":
        fw = forward_path_from_busemann(f, (0, -L), 4 * L, stop_row=0)
        g = lpp.stationary_geodesic(pair.below, pair.north_spec(), (0, -L))
        north = g.points() == fw.points()
        sw = southwest_path_from_busemann(f, (span, L), 4 * L, stop_row=0)
        g2 = lpp.stationary_geodesic(pair.above, pair.south_spec(), (span, L))
        south = g2.points()[::-1] == sw.points()
    half = L // 2
    x_mid = int(round(half * s))
    if model == "lpp":
        primal = forward_path_from_busemann(f, (0, -half), L)
        dual = southwest_path_from_busemann(f, (2 * x_mid, half), L)
    else:
        primal, dual = sample_polymer_chains(f, (0, -half), (2 * x_mid, half), L, stream.advanced(1 << 40))
    disjoint = bool(check_primal_dual_disjoint(primal, dual))
    ox, oy = f.origin
    I = f.I
    J = f.J
    dw = f.dual_weight_grid()
    cols = slice(0 - ox + 1, span - ox + 1)
    I_row = I[-half - oy, cols].copy()
    J_col = J[-L - oy + 1 : -oy, x_mid - ox].copy()
    dual_row = dw[-half - oy, cols].copy()
    return DualityReplica(f.cocycle_defect(), north, south, disjoint, I_row, J_col, dual_row, retries)


def run_duality_suite(config: ExperimentConfig) -> StatReport:
    """Exact stationary pairs: cocycle, geodesic agreement of Busemann paths,
    primal/dual disjointness and Busemann / dual-weight marginals."""
    config.validate()
    t0 = time.perf_counter()
    rep = StatReport(config.experiment, config.seed, config=config.to_dict())
    L, rho = config.prefix_length, config.rho
    for mi, model in enumerate(config.models):
        fam = _tag(TAG_DUALITY, mi)
        reps = map_replicas(
            lambda i: duality_replica(model, rho, L, replica_stream(config.seed, fam, i)), config.replicas, config.threads
        )
        N = len(reps)
        rep.notes[f"{model}_window_retries"] = sum(x.retries for x in reps)
        coc = max(x.cocycle for x in reps)
        rep.add(f"{model}_max_cocycle_defect", coc, n_replicas=N)
        rep.check(f"{model}_cocycle", coc <= TOLERANCES["cocycle_abs"], f"{coc:.3g}")
        nd = sum(x.disjoint for x in reps)
        rep.add(f"{model}_disjoint_fraction", nd / N, wilson_interval(nd, N), N)
        rep.add(f"{model}_crossings", N - nd, n_replicas=N)
        rep.check(f"{model}_no_crossings", nd == N, f"{N - nd} of {N} replicas crossed")
        if model == "lpp":
            ne = sum(x.north_match and x.south_match for x in reps)
            rep.add("lpp_edge_equivalence_fraction", ne / N, wilson_interval(ne, N), N)
            rep.check("lpp_edge_equivalence", ne == N, f"{N - ne} of {N} replicas differ")
        laws = {
            "I": Exponential(rho) if model == "lpp" else InverseGamma(rho),
            "J": Exponential(1 - rho) if model == "lpp" else InverseGamma(1 - rho),
            "dual_weight": _dist(model),
        }
        for key, attr in (("I", "I_row"), ("J", "J_col"), ("dual_weight", "dual_row")):
            sample = np.concatenate([getattr(x, attr) for x in reps])
            stat, p = ks_test(sample, laws[key].cdf)
            rep.add(f"{model}_{key}_ks_p", p, n_replicas=N)
            rep.check(f"{model}_{key}_marginal_ks", p > TOLERANCES["ks_p_min"], f"p = {p:.4g} over {sample.size} values")
    rep.runtime = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# tilt


def run_tilt_suite(config: ExperimentConfig) -> StatReport:
    """Radon-Nikodym normalisation and second moment, event-D frequencies under the
    stationary and tilted rows, and the measured Cauchy-Schwarz inequality."""
    config.validate()
    t0 = time.perf_counter()
    rep = StatReport(config.experiment, config.seed, config=config.to_dict())
    k = TOLERANCES["mean_se_multiple"]
    for mi, model in enumerate(config.models):
        log_pd = []
        for ti, t in enumerate(config.t_grid):
            spec = tilt_parameters(config.delta0, t, config.row, config.n, config.r0)
            tag = f"{model}_t{t:g}"
            rep.add(f"{tag}_lambda", spec.lam)
            rep.add(f"{tag}_eta", spec.eta)
            rep.add(f"{tag}_size_A", spec.size_A)
            rep.add(f"{tag}_size_B", spec.size_B)
            t_rn = time.perf_counter()
            rn = rn_monte_carlo(model, spec, config.aux_replicas, config.seed, tag=_tag(TAG_RN, 16 * mi + ti))
            rep.timings[f"{tag}_rn"] = time.perf_counter() - t_rn
            rep.add(f"{tag}_mean_f", rn.mean_f, (rn.mean_f - k * rn.se_f, rn.mean_f + k * rn.se_f), config.aux_replicas)
            rep.check(f"{tag}_f_normalised", abs(rn.mean_f - 1.0) <= k * rn.se_f, f"mean {rn.mean_f:.5f}, se {rn.se_f:.5f}")
            rep.add(f"{tag}_mean_f2", rn.mean_f2, (rn.mean_f2 - k * rn.se_f2, rn.mean_f2 + k * rn.se_f2), config.aux_replicas)
            rep.add(f"{tag}_closed_form_f2", rn.closed_form_f2)
            rep.add(f"{tag}_fitted_C", rn.fitted_C)
            tol = TOLERANCES["rn_second_moment_rel"]
            rep.check(
                f"{tag}_f2_matches_closed_form",
                abs(rn.relative_error_f2) <= tol,
                f"relative error {rn.relative_error_f2:.4%}",
            )
            ev = event_D_experiment(
                model, spec, config.replicas, config.seed, config.mass_threshold, tag=_tag(TAG_EVENT_D, 16 * mi + ti)
            )
            rep.notes[f"{tag}_window_retries"] = sum(x.retries for x in ev.raw)
            for key in ("D1", "D2", "D", "D1_tilted", "D2_tilted", "D_tilted"):
                rep.add(f"{tag}_P_{key}", ev.frequency(key), ev.interval(key), ev.replicas)
            rep.add(f"{tag}_importance_P_D_tilted", ev.importance_estimate, n_replicas=ev.replicas)
            rep.add(f"{tag}_event_mean_f2", ev.mean_f2, n_replicas=ev.replicas)
            rep.add(f"{tag}_cauchy_schwarz_gap", ev.cauchy_schwarz_gap, n_replicas=ev.replicas)
            rep.check(f"{tag}_cauchy_schwarz", ev.cauchy_schwarz_holds, f"gap {ev.cauchy_schwarz_gap:.4g}")
            fmin = TOLERANCES["tilt_frequency_min"]
            for key in ("D1_tilted", "D2_tilted"):
                rep.check(f"{tag}_{key}_above_{fmin:g}", ev.frequency(key) > fmin, f"{ev.frequency(key):.4f}")
            pd = ev.frequency("D")
            log_pd.append(math.log(pd) if pd > 0 else -math.inf)
        ts = np.array(config.t_grid, dtype=float)
        lp = np.array(log_pd)
        c_fit = float(np.max(-lp / ts**3)) if np.all(np.isfinite(lp)) else math.inf
        rep.add(f"{model}_fitted_C_event_D", c_fit)
        # sensitivity of the tilt to delta0: parameters and exact second moments only
        second_moment = rn_second_moment_closed_form if model == "lpp" else rn_second_moment_invgamma
        for d in config.delta0_sweep:
            for t in config.t_grid:
                tag = f"{model}_t{t:g}_delta0_{d:g}"
                try:
                    spec = tilt_parameters(d, t, config.row, config.n, config.r0)
                except KpzError as exc:
                    rep.notes[f"{tag}_rejected"] = str(exc)
                    continue
                rep.add(f"{tag}_lambda", spec.lam)
                rep.add(f"{tag}_eta", spec.eta)
                rep.add(f"{tag}_size_A", spec.size_A)
                rep.add(f"{tag}_size_B", spec.size_B)
                rep.add(f"{tag}_closed_form_f2", second_moment(spec))
    rep.runtime = time.perf_counter() - t0
    return rep


RUNNERS = {
    "tail-lpp": lambda c: tail_report(run_tail_experiment_lpp(c)),
    "tail-polymer": lambda c: tail_report(run_tail_experiment_polymer(c)),
    "stationary": run_stationary_validation,
    "exit": run_exit_concentration,
    "duality": run_duality_suite,
    "tilt": run_tilt_suite,
}


def run_experiment(config: ExperimentConfig) -> StatReport:
    return RUNNERS[config.experiment](config)
