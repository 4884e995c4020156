"""Command-line interface: ``pbmeasures <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 parse error, 3 computation contract violation.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .measures import ALL_KINDS, MeasureError, MeasureKind, OutcomeAnalysis, funding_curve
from .model import InstanceError, Rule, TieBreakOrder
from .pabulib import PabulibParseError, load_instance
from .report import (CorrelationError, build_package, correlation_matrix, losing_projects,
                     project_columns, project_rows, run_work_queue, write_csv)
from .rules import RuleError, run_rule
from .sampling import EnumerationCapExceeded, PerturbKind, SamplingConfig

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_CONTRACT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _kinds(text: str) -> tuple:
    if text == "all":
        return ALL_KINDS
    try:
        return tuple(MeasureKind(k.strip()) for k in text.split(",") if k.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _step(text: str):
    if text == "auto":
        return None
    if not text.isdigit() or int(text) < 1:
        raise argparse.ArgumentTypeError("step must be a positive integer or 'auto'")
    return int(text)


def _config(args, workers: int = 1) -> SamplingConfig:
    return SamplingConfig(samples=args.samples, step=args.step, seed=args.seed,
                          exhaustive_cap=args.exhaustive_cap, workers=workers)


def _load(args, path):
    inst, diag = load_instance(path, lenient=args.lenient)
    for line, msg in diag.warnings:
        print(f"warning: {path}:{line}: {msg}", file=sys.stderr)
    return inst


def _order(args, inst) -> TieBreakOrder:
    try:
        return TieBreakOrder.parse(args.tiebreak, inst)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    inst = _load(args, args.file)
    print(f"ok: {inst.n_projects} projects, {inst.n_voters} voters, budget {inst.budget}")
    return EXIT_OK


def cmd_outcome(args) -> int:
    inst = _load(args, args.file)
    out = run_rule(inst, args.rule, _order(args, inst))
    print(",".join(out.selected))
    if args.trace:
        Path(args.trace).write_text(json.dumps(out.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_measures(args) -> int:
    inst = _load(args, args.file)
    order = _order(args, inst)
    kinds = _kinds(args.measures)
    an = OutcomeAnalysis(inst, args.rule, order)
    if args.project == "all-losing":
        pids = losing_projects(an)
    else:
        an.require_losing(args.project)
        pids = [args.project]
    # one project: parallelise its trials; several: parallelise over projects
    if len(pids) == 1:
        items = [(inst, args.rule, order, pids, kinds, _config(args, args.workers), "")]
        records = run_work_queue(items, 1)
    else:
        cfg = _config(args)
        items = [(inst, args.rule, order, [pid], kinds, cfg, "") for pid in pids]
        records = run_work_queue(items, args.workers)
    if args.out == "csv":
        text = write_csv(project_rows(records, kinds), project_columns(kinds))
    else:
        doc = {"rule": Rule(args.rule).value,
               "projects": {r.project: {m.kind.value: m.to_dict() for m in r.results} for r in records}}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    _emit(text, args.output)
    return EXIT_OK


def cmd_package(args) -> int:
    inst = _load(args, args.file)
    grid = None
    if args.grid is not None:
        try:
            grid = tuple(int(x) for x in args.grid.split(","))
            if len(grid) != 2 or min(grid) < 1:
                raise ValueError
        except ValueError:
            raise UsageError("--grid expects two positive integers, e.g. 10,10") from None
    pkg = build_package(inst, args.rule, _order(args, inst), args.project,
                        _config(args, args.workers), curves=args.curves, grid=grid)
    _emit(pkg.to_json(), args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    inst = _load(args, args.file)
    curve = funding_curve(inst, args.rule, _order(args, inst), args.project,
                          PerturbKind(args.mode), _config(args, args.workers))
    text = write_csv(curve.to_rows(), ["ell", "frequency", "frequency_decimal", "exact"])
    _emit(text, args.out)
    return EXIT_OK


def cmd_correlate(args) -> int:
    kinds = _kinds(args.measures)
    files = sorted(Path(args.dir).glob("*.pb"))
    if not files:
        raise UsageError(f"no .pb files in {args.dir}")
    cfg = _config(args)
    items = []
    for path in files:
        inst = _load(args, path)
        order = _order(args, inst)
        t0 = time.perf_counter()
        an = OutcomeAnalysis(inst, args.rule, order)
        if args.max_rule_seconds is not None and time.perf_counter() - t0 > args.max_rule_seconds:
            print(f"skipped {path.name}: rule run exceeded {args.max_rule_seconds}s", file=sys.stderr)
            continue
        pids = losing_projects(an)
        items += [(inst, args.rule, order, [pid], kinds, cfg, path.stem) for pid in pids]
    records = run_work_queue(items, args.workers)
    if args.per_project:
        _emit(write_csv(project_rows(records, kinds), project_columns(kinds)), args.per_project)
    try:
        matrix = correlation_matrix([r.normalized() for r in records], kinds)
    except CorrelationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    _emit(matrix.to_csv(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pbmeasures", description="Closeness-to-victory measures for participatory budgeting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--lenient", action="store_true", help="downgrade file anomalies to warnings")
    common.add_argument("--tiebreak", default="file-order",
                        help="file-order, id-asc or a comma-separated project list")
    common.add_argument("--workers", type=int, default=1)

    ruled = _Parser(add_help=False)
    ruled.add_argument("--rule", required=True, choices=[r.value for r in Rule])

    sampling = _Parser(add_help=False)
    sampling.add_argument("--seed", type=int, default=0)
    sampling.add_argument("--samples", type=int, default=100)
    sampling.add_argument("--step", type=_step, default=None, help="grid step, or 'auto' (1%% of score)")
    sampling.add_argument("--exhaustive-cap", type=int, default=10**6)

    s = sub.add_parser("validate", parents=[common])
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("outcome", parents=[common, ruled])
    s.add_argument("file")
    s.add_argument("--trace", help="write the round trace as JSON")
    s.set_defaults(func=cmd_outcome)

    s = sub.add_parser("measures", parents=[common, ruled, sampling])
    s.add_argument("file")
    s.add_argument("--project", required=True, help="project id or 'all-losing'")
    s.add_argument("--measures", default="all")
    s.add_argument("--out", choices=["json", "csv"], default="json")
    s.add_argument("--output", "-o", help="output path (default stdout)")
    s.set_defaults(func=cmd_measures)

    s = sub.add_parser("package", parents=[common, ruled, sampling])
    s.add_argument("file")
    s.add_argument("--project", required=True)
    s.add_argument("--curves", action="store_true")
    s.add_argument("--grid", help="delta-steps,s-steps for the strategy grid")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_package)

    s = sub.add_parser("correlate", parents=[common, ruled, sampling])
    s.add_argument("dir")
    s.add_argument("--measures", default="all")
    s.add_argument("--out", required=True, help="correlation matrix CSV")
    s.add_argument("--per-project", help="per-project CSV")
    s.add_argument("--max-rule-seconds", type=float, default=None,
                   help="skip instances whose rule run takes longer")
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("curve", parents=[common, ruled, sampling])
    s.add_argument("file")
    s.add_argument("--project", required=True)
    s.add_argument("--mode", choices=[k.value for k in PerturbKind], required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_curve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PabulibParseError, InstanceError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (MeasureError, RuleError, EnumerationCapExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
