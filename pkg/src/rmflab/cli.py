"""Batch command line: ``rmflab <subcommand> [flags]``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CapacityError, CoverageError, PreconditionError
from .experiments import RUNNERS, ExperimentConfig, emit_report, validate_summary

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3

DEFAULTS = {
    "verify": {"X": 100, "replicas": 1},
    "theorem2": {"X": 1e4, "replicas": 300},
    "moments": {"X": 1e4, "replicas": 2000},
    "chaos-probe": {"X": 1e4, "replicas": 300},
    "covariance": {"X": 1e3, "replicas": 100, "grid_points": 30},
    "euler-moments": {"X": 1e4, "replicas": 100000},
    "ballot": {"X": 100, "replicas": 1000000},
}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--model", choices=["steinhaus", "rademacher"])
    p.add_argument("--x-anchor", type=float, dest="X", help="split point X")
    p.add_argument("--w", type=_floats, dest="W", help="comma-separated W values")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="directory for summary.json, replicas.csv, timings.json")
    p.add_argument("--plots", action="store_true", help="also write distributions.svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmflab", description="Random multiplicative function experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("verify", "run the identity suite"),
        ("theorem2", "probe large values of partial sums over the x-grid"),
        ("moments", "first-moment scaling of partial sums"),
        ("chaos-probe", "lower tail of the chaos integral"),
        ("covariance", "covariance survey over the x-grid"),
        ("euler-moments", "mixed Euler-product moments: formula, oracle, Monte Carlo"),
        ("ballot", "Gaussian ballot-walk probabilities"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "verify":
            p.add_argument("--inject-fault", action="store_true", dest="fault_injection", help="corrupt one f(p) in the large-prime part")
        if name == "moments":
            p.add_argument("--x-values", type=_floats, dest="x_values")
        if name == "chaos-probe":
            p.add_argument("--sigma", type=float)
        if name == "covariance":
            p.add_argument("--grid-points", type=int, dest="grid_points")
        if name == "euler-moments":
            p.add_argument("--alphas", type=_floats)
            p.add_argument("--ts", type=_floats)
            p.add_argument("--window", type=_floats)
            p.add_argument("--sigma", type=float)
        if name == "ballot":
            p.add_argument("--steps", type=_floats, dest="walk_steps")
            p.add_argument("--barrier", type=float, dest="walk_barrier")
            p.add_argument("--floor", type=float, dest="walk_floor")
    rep = sub.add_parser("report", help="validate and print a saved summary.json")
    rep.add_argument("run_dir", type=Path)
    return parser


_FLAG_FIELDS = (
    "model", "X", "W", "replicas", "master_seed", "threads", "out", "fault_injection",
    "x_values", "sigma", "grid_points", "alphas", "ts", "window", "walk_steps", "walk_barrier", "walk_floor",
)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {"experiment": args.command, **DEFAULTS.get(args.command, {})}
    if args.config is not None:
        with open(args.config) as fh:
            data.update(json.load(fh))
        data["experiment"] = args.command
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None and value is not False:
            data[name] = value
    return ExperimentConfig.from_dict(data)


def _report(run_dir: Path) -> int:
    path = run_dir / "summary.json"
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        print(f"rmflab: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        validate_summary(doc)
    except (ValueError, PreconditionError) as exc:
        print(f"rmflab: {path} does not match the summary schema: {exc}", file=sys.stderr)
        return EXIT_CHECK
    print(json.dumps(doc["summary"], indent=2, sort_keys=True))
    return EXIT_OK if doc["passed"] else EXIT_CHECK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report":
        return _report(args.run_dir)
    try:
        config = config_from_args(args)
        record = RUNNERS[args.command](config)
        if config.out:
            emit_report(record, config.out, plots=args.plots)
    except CapacityError as exc:
        print(f"rmflab: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (PreconditionError, CoverageError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"rmflab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(record.summary, indent=2, sort_keys=True))
    return EXIT_OK if record.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
