"""Command-line entry point.

Exit codes: 0 success, 1 validation failure or aborted assignment, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

from benchassign.assignment import (
    AssignmentOptions,
    AssignmentReport,
    OutcomeKind,
    classify_element_validity,
    enumerate_valid_configurations,
    plan_assignment,
    run_assignment,
)
from benchassign.catalog_io import Catalog, emit_report, emit_reports, parse_catalog, validate_catalog
from benchassign.costing import WeightSet
from benchassign.errors import BenchAssignError
from benchassign.execution import DEFAULT_DURATION, DEFAULT_STEP, Brake, CutInExecutor, LaneChange, replay_executor
from benchassign.radar_viz import render_radar

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_catalog_text(path: str) -> str:
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    # fall back to a shipped fixture: "fixtures/NAME", "NAME" or "NAME.catalog"
    name = p.name if p.name.endswith(".json") else f"{p.name}.json"
    for candidate in (name, name.replace(".json", ".catalog.json")):
        shipped = resources.files("benchassign.fixtures").joinpath(candidate)
        if shipped.is_file():
            return shipped.read_text(encoding="utf-8")
    raise UsageError(f"catalog not found: {path}")


def _parse_weights(text: str) -> WeightSet:
    weights = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--weights expects name=value pairs, got {part!r}")
        try:
            weights[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--weights: {value!r} is not a number") from None
    return WeightSet(weights)


def _parse_ego_mode(text: str):
    kind, _, value = text.partition(":")
    try:
        if kind == "lane_change":
            return LaneChange(float(value) if value else 3.5)
        if kind == "brake":
            return Brake(float(value)) if value else Brake()
    except ValueError:
        raise UsageError(f"--ego-mode: {value!r} is not a number") from None
    raise UsageError(f"--ego-mode expects lane_change[:PEAK] or brake[:DECEL], got {text!r}")


def _options(args: argparse.Namespace, catalog: Catalog) -> AssignmentOptions:
    options = catalog.options
    if getattr(args, "weights", None):
        options = replace(options, weights=_parse_weights(args.weights))
    if getattr(args, "margin", None) is not None:
        options = AssignmentOptions(options.weights, args.margin, options.max_iterations)
    if getattr(args, "max_iterations", None) is not None:
        options = AssignmentOptions(options.weights, options.margin, args.max_iterations)
    return options


def _test_cases(args: argparse.Namespace, catalog: Catalog):
    if getattr(args, "all_test_cases", False):
        if not catalog.test_cases:
            raise UsageError("catalog has no test cases")
        return list(catalog.test_cases)
    if args.test_case:
        tc = catalog.test_case(args.test_case)
        if tc is None:
            raise UsageError(f"unknown test case {args.test_case!r}")
        return [tc]
    if len(catalog.test_cases) != 1:
        raise UsageError(f"catalog has {len(catalog.test_cases)} test cases; pass --test-case or --all-test-cases")
    return [catalog.test_cases[0]]


def _executor(args: argparse.Namespace, catalog: Catalog):
    spec = args.executor or "cutin"
    if spec.startswith("replay:"):
        path = Path(spec[len("replay:") :])
        if not path.is_file():
            raise UsageError(f"trace not found: {path}")
        return replay_executor(path.read_text(encoding="utf-8"))
    if spec != "cutin":
        raise UsageError(f"--executor expects replay:PATH or cutin, got {spec!r}")
    base = catalog.executor
    if args.ego_mode:
        mode = _parse_ego_mode(args.ego_mode)
    elif base is not None:
        mode = base.ego_mode
    else:
        raise UsageError("the catalog names no ego mode; pass --ego-mode")
    step = args.step if args.step is not None else (base.step if base else DEFAULT_STEP)
    duration = args.duration if args.duration is not None else (base.duration if base else DEFAULT_DURATION)
    return CutInExecutor(mode, step, duration)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    # write once, atomically, so readers never see a partial report
    target = Path(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(reports: list[AssignmentReport], args: argparse.Namespace) -> int:
    if len(reports) == 1 and not getattr(args, "all_test_cases", False):
        text = emit_report(reports[0], args.format)
    else:
        text = emit_reports(reports, args.format)
    _write(text, args.out)
    failed = [r for r in reports if r.outcome.is_abort]
    for r in failed:
        print(f"{r.test_case_id}: {r.outcome.kind.value}: {r.outcome.reason}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    catalog = parse_catalog(_read_catalog_text(args.catalog), validate=False)
    report = validate_catalog(catalog)
    for f in report.findings:
        print(f"{f.code}: {f.subject}: {f.message}")
    if report.ok:
        print(f"ok: {len(catalog.benches)} benches, {len(catalog.test_cases)} test cases")
        return EXIT_OK
    return EXIT_FAILED


def cmd_render(args: argparse.Namespace) -> int:
    catalog = parse_catalog(_read_catalog_text(args.catalog))
    bench = catalog.bench(args.bench)
    if bench is None:
        raise UsageError(f"unknown bench {args.bench!r}")
    highlight = None
    if args.tbc:
        highlight = bench.configuration(args.tbc)
        if highlight is None:
            every = enumerate_valid_configurations(bench, classify_element_validity(bench, {}))
            highlight = next((c for c in every if c.id == args.tbc), None)
        if highlight is None:
            raise UsageError(f"unknown configuration {args.tbc!r} at bench {bench.id}")
    _write(render_radar(bench, highlight), args.out)
    return EXIT_OK


def cmd_assign(args: argparse.Namespace) -> int:
    catalog = parse_catalog(_read_catalog_text(args.catalog))
    options = _options(args, catalog)
    executor, rounds = None, 0
    if args.trace:
        path = Path(args.trace)
        if not path.is_file():
            raise UsageError(f"trace not found: {path}")
        executor, rounds = replay_executor(path.read_text(encoding="utf-8")), 1
    reports = [
        plan_assignment(catalog.benches, catalog.requirements, tc, options, executor=executor, rounds=rounds)
        for tc in _test_cases(args, catalog)
    ]
    return _emit(reports, args)


def cmd_run(args: argparse.Namespace) -> int:
    catalog = parse_catalog(_read_catalog_text(args.catalog))
    options = _options(args, catalog)
    test_cases = _test_cases(args, catalog)
    executor = _executor(args, catalog)

    def one(tc):
        return run_assignment(catalog.benches, catalog.requirements, tc, executor, options)

    if len(test_cases) > 1:
        # executors hold no mutable state, so cases can share one
        with ThreadPoolExecutor() as pool:
            reports = list(pool.map(one, test_cases))
    else:
        reports = [one(tc) for tc in test_cases]
    return _emit(reports, args)


def cmd_costs(args: argparse.Namespace) -> int:
    catalog = parse_catalog(_read_catalog_text(args.catalog))
    options = _options(args, catalog)
    reports = [
        plan_assignment(catalog.benches, catalog.requirements, tc, options) for tc in _test_cases(args, catalog)
    ]
    if args.format == "structured":
        return _emit(reports, args)
    lines = []
    for r in reports:
        lines.append(f"test case {r.test_case_id}")
        costed = r.iterations[-1].costed_configurations
        if not costed:
            lines.append(f"  {r.outcome.kind.value}: {r.outcome.reason}")
            continue
        width = max(len(c.tbc.id) for c in costed)
        for c in sorted(costed, key=lambda c: (c.cost, c.tbc.id)):
            source = "override" if c.tbc.cost_override is not None else "sum of elements"
            mark = "*" if c.tbc.id == r.outcome.tbc_id else " "
            lines.append(f"{mark} {c.tbc.id:<{width}}  {c.cost:>10.6g}  ({source})")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_FAILED if any(r.outcome.is_abort for r in reports) else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benchassign", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, fmt: str | None = "structured") -> None:
        p.add_argument("--catalog", required=True, help="catalog document, or the name of a shipped fixture")
        p.add_argument("--out", help="output file (default: stdout)")
        if fmt is not None:
            p.add_argument("--format", choices=("structured", "human_text"), default=fmt)
        p.add_argument("--seed", type=int, help="reserved; nothing is stochastic")

    def assignment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--test-case")
        p.add_argument("--all-test-cases", action="store_true")
        p.add_argument("--weights", help="criterion weights, e.g. time_use=0.5,execution_cost=0.5")
        p.add_argument("--margin", type=float)
        p.add_argument("--max-iterations", type=int)

    p = sub.add_parser("validate", help="check a catalog")
    common(p, fmt=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="write a radar chart as SVG")
    common(p, fmt=None)
    p.add_argument("--bench", required=True)
    p.add_argument("--tbc")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("assign", help="plan without executing")
    common(p)
    assignment_flags(p)
    p.add_argument("--trace", help="replay this trace for one execution round before planning")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("run", help="run the full assignment loop")
    common(p)
    assignment_flags(p)
    p.add_argument("--executor", help="replay:PATH or cutin (default: cutin)")
    p.add_argument("--ego-mode", help="lane_change[:PEAK] or brake[:DECEL]")
    p.add_argument("--step", type=float)
    p.add_argument("--duration", type=float)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("costs", help="print the cost table of the planned iteration")
    common(p, fmt="human_text")
    assignment_flags(p)
    p.set_defaults(func=cmd_costs)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BenchAssignError as exc:
        print(str(exc), file=sys.stderr)
        for f in exc.findings[1:]:
            print(f"{f.code}: {f.subject}: {f.message}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
