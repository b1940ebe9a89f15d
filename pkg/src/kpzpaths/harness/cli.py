"""Command line: ``kpzpaths <experiment> [options]``.

Exit status 0 when every check passes, 2 when a tolerance check fails, 1 on error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..errors import KpzError
from .config import EXPERIMENTS, load_config, make_config
from .experiments import run_experiment
from .report import StatReport, emit_results, to_csv, to_json
from .validate import run_validation

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kpzpaths", description="Monte Carlo experiments for LPP and polymer paths.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with experiment config fields")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--out", help="output path; stdout when omitted")
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("--threads", type=int)
        if name == "validate":
            continue
        sp.add_argument("--model", choices=("lpp", "polymer", "both"))
        sp.add_argument("--n", type=int)
        sp.add_argument("--r", type=int)
        sp.add_argument("--rho", type=float)
        sp.add_argument("--delta0", type=float)
        sp.add_argument("--window", type=int, help="half-width of the boundary window")
        sp.add_argument("--t-grid", type=_floats, dest="t_grid", help="comma separated t values")
        sp.add_argument("--rho-grid", type=_floats, dest="rho_grid")
        sp.add_argument("--n-grid", type=_ints, dest="n_grid")
        sp.add_argument("--aux-replicas", type=int, dest="aux_replicas")
        sp.add_argument("--variance-replicas", type=int, dest="variance_replicas")
        sp.add_argument("--delta0-sweep", type=_floats, dest="delta0_sweep",
                        help="delta0 values for the tilt sensitivity table")
        sp.add_argument("--deviation-constant", type=float, dest="deviation_constant",
                        help="constant a in the deviation threshold a t r^(2/3)")
    return p


_OVERRIDES = (
    "seed", "replicas", "threads", "model", "n", "r", "rho", "delta0", "window",
    "t_grid", "rho_grid", "n_grid", "aux_replicas", "variance_replicas", "deviation_constant",
    "delta0_sweep",
)


def _summary(rep: StatReport) -> str:
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.detail}".rstrip() for c in rep.checks]
    if rep.runtime is not None:
        lines.append(f"runtime {rep.runtime:.1f}s")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            rep = run_validation(seed=args.seed if args.seed is not None else 1)
        else:
            overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
            overrides["output"] = args.out
            if args.config:
                cfg = load_config(args.config, args.command, overrides)
            else:
                cfg = make_config(args.command, overrides)
            rep = run_experiment(cfg)
        if args.out:
            emit_results(rep, args.out, args.format)
        else:
            sys.stdout.write(to_json(rep) if args.format == "json" else to_csv(rep))
        print(_summary(rep), file=sys.stderr)
    except (KpzError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
