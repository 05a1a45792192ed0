"""``hacss run`` and ``hacss validate``.

Exit codes: 0 ok, 2 bad scenario, 3 a run broke one of its own invariants.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import metrics, scenario, sim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(path: str) -> scenario.Scenario:
    try:
        return scenario.load(path)
    except OSError as exc:
        raise scenario.ConfigInvalid([("<file>", f"cannot read {path}: {exc.strerror}")]) from None


def _report_config(path: str, exc: scenario.ConfigInvalid) -> int:
    for where, msg in exc.problems:
        print(f"{path}: {where}: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_validate(args) -> int:
    try:
        sc = _load(args.scenario)
    except scenario.ConfigInvalid as exc:
        return _report_config(args.scenario, exc)
    print(f"{args.scenario}: ok ({sc.name}, I={sc.I}, s={sc.s}, duration={sc.duration})")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        sc = _load(args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise scenario.ConfigInvalid([("seed", "must be a non-negative integer")])
            sc = sc.with_seed(args.seed)
    except scenario.ConfigInvalid as exc:
        return _report_config(args.scenario, exc)
    try:
        report = sim.run(sc)
    except sim.InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    table = metrics.compare(report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "report.json", report.to_json())
    _atomic_write(out / "report.csv", report.to_csv())
    _atomic_write(out / "comparison.csv", table.to_csv())
    flagged = ", ".join(r.metric for r in table.flagged) or "none"
    print(f"{sc.name}: seed={sc.seed} ticks={sc.duration} outcomes={sum(report.outcomes.values())} flagged={flagged}")
    print(f"wrote {out / 'report.json'}, {out / 'report.csv'}, {out / 'comparison.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hacss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a scenario and write report.json, report.csv, comparison.csv")
    p.add_argument("scenario")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
