"""Experiment reports and their CSV / JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from ..errors import KpzError

CSV_COLUMNS = ("experiment", "statistic", "value", "ci_lo", "ci_hi", "n_replicas", "seed")


class ReportIOError(KpzError, OSError):
    """Reading or writing a report failed; the message names the path."""


@dataclass(frozen=True)
class Statistic:
    name: str
    value: float
    ci_lo: float = math.nan
    ci_hi: float = math.nan
    n_replicas: int = 0


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class StatReport:
    """Named results with intervals, pass/fail checks and the config that produced them.

    ``runtime`` and the per-section ``timings`` are kept on the object but left out
    of JSON so that reruns with the same config and seed write identical bytes.
    """

    experiment: str
    seed: int
    statistics: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    runtime: Optional[float] = None
    timings: dict = field(default_factory=dict)

    def add(self, name: str, value: float, ci: tuple = (math.nan, math.nan), n_replicas: int = 0) -> Statistic:
        s = Statistic(name, float(value), float(ci[0]), float(ci[1]), int(n_replicas))
        self.statistics.append(s)
        return s

    def check(self, name: str, passed: bool, detail: str = "") -> Check:
        c = Check(name, bool(passed), detail)
        self.checks.append(c)
        return c

    def merge(self, other: "StatReport", prefix: str = "") -> None:
        for s in other.statistics:
            self.statistics.append(Statistic(prefix + s.name, s.value, s.ci_lo, s.ci_hi, s.n_replicas))
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.detail))
        for k, v in other.notes.items():
            self.notes[prefix + k] = v

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def statistic(self, name: str) -> Statistic:
        for s in self.statistics:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "statistics": [
                {
                    "experiment": self.experiment,
                    "statistic": s.name,
                    "value": s.value,
                    "ci_lo": s.ci_lo,
                    "ci_hi": s.ci_hi,
                    "n_replicas": s.n_replicas,
                    "seed": self.seed,
                }
                for s in self.statistics
            ],
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
            "notes": self.notes,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatReport":
        stats = [
            Statistic(s["statistic"], s["value"], s["ci_lo"], s["ci_hi"], s["n_replicas"]) for s in d.get("statistics", [])
        ]
        checks = [Check(c["name"], c["passed"], c.get("detail", "")) for c in d.get("checks", [])]
        return cls(d["experiment"], d["seed"], stats, checks, d.get("config", {}), d.get("notes", {}))


def to_json(report: StatReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def to_csv(report: StatReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in report.statistics:
        w.writerow([report.experiment, s.name, repr(s.value), repr(s.ci_lo), repr(s.ci_hi), s.n_replicas, report.seed])
    return buf.getvalue()


def emit_results(report: StatReport, path: str, format: str = "json") -> None:
    """Write ``report`` as CSV (one row per statistic) or JSON."""
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")
    text = to_json(report) if format == "json" else to_csv(report)
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def load_results(path: str) -> StatReport:
    """Inverse of :func:`emit_results`; JSON restores everything but ``runtime``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        return StatReport.from_dict(json.loads(text))
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ReportIOError(f"{path} is not a results file")
    body = rows[1:]
    if not body:
        return StatReport("", 0)
    exp, seed = body[0][0], int(body[0][6])
    rep = StatReport(exp, seed)
    for row in body:
        rep.add(row[1], float(row[2]), (float(row[3]), float(row[4])), int(row[5]))
    return rep
