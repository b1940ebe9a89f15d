"""Experiment configuration: defaults per experiment, JSON loading, validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Optional

from ..errors import ConfigError, KpzError
from ..tilt import tilt_parameters

EXPERIMENTS = ("tail-lpp", "tail-polymer", "stationary", "exit", "duality", "tilt")
MODELS = ("lpp", "polymer", "both")
TAIL_T_GRID = (0.6, 0.8, 1.0, 1.2, 1.4, 1.6)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: str = "both"
    n: int = 512
    r: Optional[int] = None
    r0: int = 1
    t_grid: tuple = TAIL_T_GRID
    rho: float = 0.5
    rho_grid: tuple = (0.4, 0.5, 0.6)
    n_grid: tuple = (64, 128, 256, 512)
    polymer_n: int = 32
    delta0: float = 0.01
    delta0_sweep: tuple = (0.04, 0.01, 0.0025)
    replicas: int = 1000
    aux_replicas: int = 200
    variance_replicas: int = 5000
    seed: int = 1
    window: Optional[int] = None
    increment_level: int = 16
    prefix_length: int = 200
    epsilons: tuple = (0.1,)
    mass_threshold: float = 0.5
    deviation_constant: float = 1.0
    threads: int = 1
    output: Optional[str] = None

    @property
    def row(self) -> int:
        return self.n // 2 if self.r is None else int(self.r)

    @property
    def models(self) -> tuple[str, ...]:
        return ("lpp", "polymer") if self.model == "both" else (self.model,)

    def to_dict(self) -> dict:
        """Fields that determine results; output path and thread count are left out."""
        d = asdict(self)
        d.pop("output")
        d.pop("threads")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def validate(self) -> "ExperimentConfig":
        """Check every precondition of the chosen experiment; raises ConfigError."""
        e = self.experiment
        if e not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {e!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if min(self.replicas, self.aux_replicas, self.variance_replicas) < 1:
            raise ConfigError("replica counts must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.window is not None and self.window < 1:
            raise ConfigError("window override must be positive")
        if not 0.0 < self.rho < 1.0 or not all(0.0 < x < 1.0 for x in self.rho_grid):
            raise ConfigError("rho values must lie in (0, 1)")
        if any(not math.isfinite(t) or t < 0 for t in self.t_grid) or not self.t_grid:
            raise ConfigError("t grid must be a non-empty list of finite nonnegative values")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not (math.isfinite(self.deviation_constant) and self.deviation_constant > 0):
            raise ConfigError("deviation constant must be positive")
        if e in ("tail-lpp", "tail-polymer", "tilt"):
            r = self.row
            if not (self.r0 <= r and 2 * r <= self.n):
                raise ConfigError(f"need r0 <= r <= n/2, got r={r}, n={self.n}, r0={self.r0}")
        if e == "tail-polymer" and not all(0.0 < x < 1.0 for x in self.epsilons):
            raise ConfigError("epsilons must lie in (0, 1)")
        if e == "stationary":
            if any(m < 2 for m in self.n_grid) or self.polymer_n < 1 or self.increment_level < 1:
                raise ConfigError("sizes must be positive")
            if len(self.n_grid) < 2:
                raise ConfigError("variance scaling needs at least two sizes")
        if e == "duality" and self.prefix_length < 2:
            raise ConfigError("prefix length must be at least 2")
        if e == "tilt":
            if not all(0.0 < d <= 0.04 for d in self.delta0_sweep):
                raise ConfigError("delta0 sweep values must lie in (0, 0.04]")
            if not 0.0 < self.mass_threshold <= 1.0:
                raise ConfigError("mass threshold must lie in (0, 1]")
            for t in self.t_grid:
                try:
                    tilt_parameters(self.delta0, t, self.row, self.n, self.r0)
                except KpzError as exc:
                    raise ConfigError(f"tilt parameters rejected at t={t}: {exc}") from exc
        return self


DEFAULTS: dict[str, dict[str, Any]] = {
    "tail-lpp": dict(model="lpp", n=512, t_grid=TAIL_T_GRID, replicas=100_000),
    "tail-polymer": dict(model="polymer", n=512, t_grid=TAIL_T_GRID, replicas=100_000),
    "stationary": dict(n=64, polymer_n=32, replicas=10_000, aux_replicas=200),
    "exit": dict(n=256, t_grid=(1.0, 2.0, 3.0), replicas=2000),
    "duality": dict(replicas=1000, prefix_length=200),
    "tilt": dict(n=1000, r=500, t_grid=(1.0,), replicas=400, aux_replicas=1_000_000),
}

_TUPLE_FIELDS = {f.name for f in fields(ExperimentConfig) if f.type == "tuple"}
_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def _coerce(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k not in _FIELD_NAMES:
            raise ConfigError(f"unknown config field {k!r}")
        if k in _TUPLE_FIELDS and v is not None:
            v = tuple(v)
        out[k] = v
    return out


def make_config(experiment: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Experiment defaults updated by ``overrides`` (``None`` values are ignored), then validated."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    base = dict(DEFAULTS[experiment])
    base.update({k: v for k, v in (overrides or {}).items() if v is not None})
    base["experiment"] = experiment
    try:
        cfg = ExperimentConfig(**_coerce(base))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: str, experiment: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a JSON object of config fields; ``overrides`` win over the file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    exp = experiment or data.get("experiment")
    if exp is None:
        raise ConfigError("config names no experiment")
    if experiment is not None and data.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
    merged = {k: v for k, v in data.items() if k != "experiment"}
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return make_config(exp, merged)


__all__ = ["EXPERIMENTS", "ExperimentConfig", "make_config", "load_config", "DEFAULTS"]
