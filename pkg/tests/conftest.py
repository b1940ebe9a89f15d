"""Independent oracles shared by the test modules, and the acceptance summary hook."""

import itertools
import math

import mpmath
import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def paths(w, h):
    """Every up-right vertex sequence from (0,0) to (w-1, h-1)."""
    n = w + h - 2
    for ups in itertools.combinations(range(n), h - 1):
        x = y = 0
        out = [(0, 0)]
        for k in range(n):
            if k in ups:
                y += 1
            else:
                x += 1
            out.append((x, y))
        yield out


def brute_lpp(weights):
    """Max path sum, accumulated along each path from its start."""
    h, w = weights.shape
    best = -math.inf
    for p in paths(w, h):
        s = 0.0
        for x, y in p:
            s = s + float(weights[y, x])
        best = max(best, s)
    return best


def brute_lpp_argmax(weights):
    h, w = weights.shape
    best, arg = -math.inf, None
    for p in paths(w, h):
        s = sum(float(weights[y, x]) for x, y in p)
        if s > best:
            best, arg = s, p
    return best, arg


def mp_logz(weights, dps=50):
    """log of the sum over paths of weight products in high precision."""
    with mpmath.workdps(dps):
        h, w = weights.shape
        mw = [[mpmath.mpf(float(weights[y, x])) for x in range(w)] for y in range(h)]
        tot = mpmath.mpf(0)
        for p in paths(w, h):
            prod = mpmath.mpf(1)
            for x, y in p:
                prod *= mw[y][x]
            tot += prod
        return float(mpmath.log(tot))


def path_weight_product(weights, p):
    return math.prod(float(weights[y, x]) for x, y in p)


def row_potential(values, first, origin, i, log=False):
    """h_i from the raw edge values: sum of edges origin+1..i, or minus edges i+1..origin."""
    inc = np.log(values) if log else np.asarray(values, dtype=float)
    edge = lambda j: float(inc[j - first])
    if i >= origin:
        return sum(edge(j) for j in range(origin + 1, i + 1))
    return -sum(edge(j) for j in range(i + 1, origin + 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
