"""Confidence intervals, goodness-of-fit wrappers and tail-exponent fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DomainError, InsufficientDataError

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    if not 0 <= successes <= trials:
        raise DomainError("successes must lie in [0, trials]")
    p = successes / trials
    z2 = z * z
    den = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / den
    # rounding can push a bound past p when p is 0 or 1
    return (max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half)))


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def ks_test(sample, cdf: Callable) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test; returns (statistic, p-value)."""
    res = sps.kstest(np.asarray(sample, dtype=float), cdf)
    return float(res.statistic), float(res.pvalue)


def chi_square_test(observed, expected) -> tuple[float, float]:
    """Pearson chi-square goodness of fit; expected counts are rescaled to the observed total."""
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    exp = exp * obs.sum() / exp.sum()
    res = sps.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class TailCurve:
    """Empirical tail probabilities p(t).

    For indicator events ``successes``/``trials`` are counts and intervals are
    Wilson intervals.  For averaged probabilities (mean of a quenched
    probability) pass ``se`` and the interval is the normal one.
    """

    t: np.ndarray
    p: np.ndarray
    successes: np.ndarray
    trials: np.ndarray
    se: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("t", "p", "successes", "trials"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.se is not None:
            object.__setattr__(self, "se", np.asarray(self.se, dtype=float))
        k = self.t.size
        if not (self.p.size == self.successes.size == self.trials.size == k):
            raise DomainError("curve arrays must have equal length")

    @classmethod
    def from_counts(cls, t, successes, trials) -> "TailCurve":
        s = np.asarray(successes, dtype=float)
        n = np.asarray(trials, dtype=float)
        return cls(np.asarray(t, dtype=float), s / n, s, n)

    @classmethod
    def from_means(cls, t, means, ses, trials) -> "TailCurve":
        means = np.asarray(means, dtype=float)
        n = np.broadcast_to(np.asarray(trials, dtype=float), means.shape)
        return cls(np.asarray(t, dtype=float), means, means * n, n, np.asarray(ses, dtype=float))

    def intervals(self) -> np.ndarray:
        if self.se is not None:
            lo = np.clip(self.p - Z95 * self.se, 0.0, 1.0)
            hi = np.clip(self.p + Z95 * self.se, 0.0, 1.0)
            return np.stack([lo, hi], axis=1)
        return np.array([wilson_interval(int(s), int(n)) for s, n in zip(self.successes, self.trials)]).reshape(-1, 2)

    def monotonicity_violations(self) -> list[int]:
        """Indices i where p rises from t_i to t_{i+1} beyond both intervals."""
        ci = self.intervals()
        order = np.argsort(self.t)
        bad = []
        for a, b in zip(order[:-1], order[1:]):
            if ci[b, 0] > ci[a, 1]:
                bad.append(int(a))
        return bad

    @property
    def monotone(self) -> bool:
        return not self.monotonicity_violations()

    def variance_of_p(self) -> np.ndarray:
        if self.se is not None:
            return self.se**2
        return self.p * (1.0 - self.p) / self.trials


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    slope_se: float
    intercept_se: float
    ci: tuple[float, float]
    points_used: int


def fit_power_law(curve: TailCurve, min_trials: int = 50, z: float = Z95) -> PowerLawFit:
    """Weighted least squares of log(-log p) on log t.

    Weights come from the delta method: Var log(-log p) = Var p / (p log p)^2.
    Points with t <= 0, p in {0, 1} or fewer than ``min_trials`` trials are dropped.
    """
    t, p = curve.t, curve.p
    var_p = curve.variance_of_p()
    keep = (t > 0) & (p > 0) & (p < 1) & (curve.trials >= min_trials)
    if int(keep.sum()) < 3:
        raise InsufficientDataError(f"{int(keep.sum())} usable points, need 3")
    x = np.log(t[keep])
    pk = p[keep]
    y = np.log(-np.log(pk))
    vy = var_p[keep] / (pk * np.log(pk)) ** 2
    if np.all(vy == 0):
        w = np.ones_like(vy)
    else:
        floor = np.min(vy[vy > 0]) if np.any(vy > 0) else 1.0
        w = 1.0 / np.maximum(vy, floor * 1e-12)
    X = np.stack([np.ones_like(x), x], axis=1)
    A = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (w * y))
    cov = np.linalg.inv(A)
    resid = y - X @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if np.all(vy == 0):
        se_s = se_i = 0.0
    else:
        se_i, se_s = (float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    slope, icpt = float(beta[1]), float(beta[0])
    return PowerLawFit(slope, icpt, r2, se_s, se_i, (slope - z * se_s, slope + z * se_s), int(keep.sum()))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Ordinary least-squares slope of log y on log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
