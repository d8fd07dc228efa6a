"""Catalog, trace and report documents.

One JSON-compatible format with ``schema_version: "tbc/1"`` and a top-level
``kind`` (``catalog``, ``trace``, ``assignment_report``,
``assignment_reports``). Emission is canonical: sorted keys, two-space
indentation, UTF-8 without escapes, LF line endings, a trailing newline.
Report floats are quantized to 1e-12 so identical runs give identical bytes.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema

from benchassign.assignment import (
    AssignmentOptions,
    AssignmentReport,
    IterationRecord,
    Outcome,
    QuantityHull,
    TraceSummary,
    ValidityLabel,
    ValidityReason,
    quantize,
)
from benchassign.costing import CostedConfiguration, WeightSet
from benchassign.errors import BenchAssignError
from benchassign.execution import (
    DEFAULT_DURATION,
    DEFAULT_STEP,
    Brake,
    CriterionResult,
    CutInExecutor,
    EgoMode,
    ExecutionTrace,
    LaneChange,
    Violation,
)
from benchassign.model import (
    CouplingEffect,
    CouplingRule,
    Element,
    EvaluationCriterion,
    Finding,
    ForbiddenStagePair,
    Port,
    PortDirection,
    ScenarioParameter,
    TestBench,
    TestBenchConfiguration,
    TestCase,
    TestObjectRequirements,
    ValidationReport,
    ValidityDomain,
    validate_test_bench,
)

SCHEMA_VERSION = "tbc/1"


@dataclass(frozen=True)
class ExecutorSpec:
    """Executor a catalog asks for; only the cut-in kinematics exist in v1."""

    ego_mode: EgoMode
    step: float = DEFAULT_STEP
    duration: float = DEFAULT_DURATION
    kind: str = "cutin"

    def build(self) -> CutInExecutor:
        return CutInExecutor(self.ego_mode, self.step, self.duration)


@dataclass(frozen=True)
class Catalog:
    benches: tuple[TestBench, ...]
    test_cases: tuple[TestCase, ...]
    requirements: TestObjectRequirements
    options: AssignmentOptions
    executor: ExecutorSpec | None = None

    def bench(self, bench_id: str) -> TestBench | None:
        return next((b for b in self.benches if b.id == bench_id), None)

    def test_case(self, test_case_id: str) -> TestCase | None:
        return next((t for t in self.test_cases if t.id == test_case_id), None)


# ---------------------------------------------------------------------------
# Low-level helpers
# ---------------------------------------------------------------------------


def _dumps(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2, allow_nan=False) + "\n"


def _loads(text: str | bytes, kind: str) -> dict[str, Any]:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BenchAssignError("PARSE_ERROR", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BenchAssignError("PARSE_ERROR", exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise BenchAssignError("PARSE_ERROR", "document must be an object", line=1)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise BenchAssignError("SCHEMA_VERSION_UNSUPPORTED", f"expected {SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}")
    if doc.get("kind") != kind:
        raise BenchAssignError("PARSE_ERROR", f"expected a {kind} document, got kind {doc.get('kind')!r}")
    return doc


@lru_cache(maxsize=None)
def _validator(name: str) -> jsonschema.protocols.Validator:
    schema = json.loads(resources.files("benchassign.schema").joinpath(f"{name}.schema.json").read_text("utf-8"))
    return jsonschema.Draft202012Validator(schema)


def _check_schema(doc: Mapping[str, Any], name: str) -> None:
    error = jsonschema.exceptions.best_match(_validator(name).iter_errors(doc))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise BenchAssignError("PARSE_ERROR", f"{where}: {error.message}")


def _structure(fn, *args):
    """Run a decoder, mapping missing keys and wrong shapes to PARSE_ERROR."""
    try:
        return fn(*args)
    except BenchAssignError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError, IndexError) as exc:
        raise BenchAssignError("PARSE_ERROR", f"malformed document: {exc!r}") from None


def _pair(values: Sequence[float] | None) -> tuple[float, float] | None:
    return None if values is None else (float(values[0]), float(values[1]))


# ---------------------------------------------------------------------------
# Model records
# ---------------------------------------------------------------------------


def _domain_to(d: ValidityDomain) -> dict[str, Any]:
    return {"quantity": d.quantity, "unit": d.unit, "lo": d.lo, "hi": d.hi}


def _domain_from(raw: Mapping[str, Any]) -> ValidityDomain:
    return ValidityDomain(raw["quantity"], raw["unit"], raw["lo"], raw["hi"])


def _required_to(required: Mapping[str, Sequence[ValidityDomain]]) -> dict[str, Any]:
    return {k: [_domain_to(d) for d in v] for k, v in required.items()}


def _required_from(raw: Mapping[str, Any]) -> dict[str, tuple[ValidityDomain, ...]]:
    return {k: tuple(_domain_from(d) for d in v) for k, v in raw.items()}


def _element_to(e: Element) -> dict[str, Any]:
    return {
        "id": e.id,
        "dimension": e.dimension.key,
        "stage": e.stage.value,
        "validity": [_domain_to(d) for d in e.validity],
        "expert_asserted_valid": e.expert_asserted_valid,
        "ports": [{"name": p.name, "protocol": p.protocol, "direction": p.direction.value} for p in e.ports],
        "criterion_costs": dict(e.criterion_costs),
    }


def _element_from(raw: Mapping[str, Any]) -> Element:
    return Element(
        id=raw["id"],
        dimension=raw["dimension"],
        stage=raw["stage"],
        validity=tuple(_domain_from(d) for d in raw.get("validity", ())),
        expert_asserted_valid=raw.get("expert_asserted_valid", False),
        ports=tuple(Port(p["name"], p["protocol"], p["direction"]) for p in raw.get("ports", ())),
        criterion_costs=raw.get("criterion_costs", {}),
    )


def _rule_to(rule: CouplingRule) -> dict[str, Any]:
    if isinstance(rule, ForbiddenStagePair):
        return {
            "kind": rule.kind,
            "dimension_a": rule.dimension_a.key,
            "stage_a": rule.stage_a.value,
            "dimension_b": rule.dimension_b.key,
            "stage_b": rule.stage_b.value,
        }
    out = {"kind": rule.kind, "element_a": rule.element_a, "element_b": rule.element_b, "effect": rule.effect.value}
    if rule.domain is not None:
        out["domain"] = _domain_to(rule.domain)
    return out


def _rule_from(raw: Mapping[str, Any]) -> CouplingRule:
    if raw["kind"] == ForbiddenStagePair.kind:
        return ForbiddenStagePair(raw["dimension_a"], raw["stage_a"], raw["dimension_b"], raw["stage_b"])
    domain = _domain_from(raw["domain"]) if "domain" in raw else None
    return CouplingEffect(raw["element_a"], raw["element_b"], raw["effect"], domain)


def _tbc_to(tbc: TestBenchConfiguration, *, with_bench: bool = False) -> dict[str, Any]:
    out = {"id": tbc.id, "selection": dict(tbc.selection), "cost_override": tbc.cost_override}
    if with_bench:
        out["bench_id"] = tbc.bench_id
    return out


def _tbc_from(raw: Mapping[str, Any], bench_id: str) -> TestBenchConfiguration:
    return TestBenchConfiguration(raw["id"], bench_id, raw["selection"], raw.get("cost_override"))


def _bench_to(bench: TestBench) -> dict[str, Any]:
    return {
        "id": bench.id,
        "elements": [_element_to(e) for e in bench.elements],
        "coupling_rules": [_rule_to(r) for r in bench.coupling_rules],
        "configurations": [_tbc_to(c) for c in bench.configurations],
        "uncovered": sorted(bench.uncovered),
    }


def _bench_from(raw: Mapping[str, Any]) -> TestBench:
    return TestBench(
        id=raw["id"],
        elements=tuple(_element_from(e) for e in raw["elements"]),
        coupling_rules=tuple(_rule_from(r) for r in raw.get("coupling_rules", ())),
        configurations=tuple(_tbc_from(c, raw["id"]) for c in raw.get("configurations", ())),
        uncovered=frozenset(raw.get("uncovered", ())),
    )


def _requirements_to(reqs: TestObjectRequirements) -> dict[str, Any]:
    return {
        "allowed_stages": {k: sorted(s.value for s in v) for k, v in reqs.allowed_stages.items()},
        "required_ports": [{"name": p.name, "protocol": p.protocol} for p in reqs.required_ports],
    }


def _requirements_from(raw: Mapping[str, Any]) -> TestObjectRequirements:
    return TestObjectRequirements(
        allowed_stages=raw.get("allowed_stages", {}),
        required_ports=tuple(
            Port(p["name"], p["protocol"], PortDirection.REQUIRES) for p in raw.get("required_ports", ())
        ),
    )


def _criterion_to(c: EvaluationCriterion) -> dict[str, Any]:
    return {
        "id": c.id,
        "quantity": c.quantity,
        "unit": c.unit,
        "aggregate": c.aggregate,
        "comparator": c.comparator,
        "threshold": c.threshold,
    }


def _test_case_to(tc: TestCase) -> dict[str, Any]:
    return {
        "id": tc.id,
        "scenario_parameters": {
            k: {"value": p.value, "unit": p.unit, "layer": p.layer.value} for k, p in tc.scenario_parameters.items()
        },
        "evaluation_criteria": [_criterion_to(c) for c in tc.evaluation_criteria],
        "required_validity": _required_to(tc.required_validity),
    }


def _test_case_from(raw: Mapping[str, Any]) -> TestCase:
    return TestCase(
        id=raw["id"],
        scenario_parameters={
            k: ScenarioParameter(p["value"], p["unit"], p["layer"]) for k, p in raw["scenario_parameters"].items()
        },
        evaluation_criteria=tuple(EvaluationCriterion(**c) for c in raw["evaluation_criteria"]),
        required_validity=_required_from(raw.get("required_validity", {})),
    )


def _ego_mode_to(mode: EgoMode) -> dict[str, Any]:
    if isinstance(mode, LaneChange):
        return {"kind": "lane_change", "peak_lateral_acceleration": mode.peak_lateral_acceleration}
    return {"kind": "brake", "peak_deceleration": mode.peak_deceleration, "ramp": mode.ramp, "hold": mode.hold}


def _ego_mode_from(raw: Mapping[str, Any]) -> EgoMode:
    if raw["kind"] == "lane_change":
        return LaneChange(float(raw["peak_lateral_acceleration"]))
    return Brake(**{k: float(v) for k, v in raw.items() if k != "kind"})


def _options_to(options: AssignmentOptions) -> dict[str, Any]:
    return {"weights": dict(options.weights.weights), "margin": options.margin, "max_iterations": options.max_iterations}


def _options_from(raw: Mapping[str, Any]) -> AssignmentOptions:
    return AssignmentOptions(
        WeightSet(raw["weights"]), float(raw.get("margin", 0.0)), raw.get("max_iterations", 8)
    )


# ---------------------------------------------------------------------------
# Catalogs
# ---------------------------------------------------------------------------


def validate_catalog(catalog: Catalog) -> ValidationReport:
    """Bench findings plus catalog-wide identity and cross-reference checks."""
    findings: list[Finding] = []
    seen: set[str] = set()
    for bench in catalog.benches:
        if bench.id in seen:
            findings.append(Finding("DUPLICATE_BENCH_ID", bench.id, "bench id used twice"))
        seen.add(bench.id)
        findings.extend(validate_test_bench(bench).findings)
    tbc_ids = [c.id for b in catalog.benches for c in b.configurations]
    for tbc_id in sorted({i for i in tbc_ids if tbc_ids.count(i) > 1}):
        findings.append(Finding("DUPLICATE_CONFIGURATION_ID", tbc_id, "configuration id used by more than one entry"))
    tc_ids = [t.id for t in catalog.test_cases]
    for tc_id in sorted({i for i in tc_ids if tc_ids.count(i) > 1}):
        findings.append(Finding("DUPLICATE_TEST_CASE_ID", tc_id, "test case id used twice"))
    return ValidationReport(tuple(findings))


def parse_catalog(document: str | bytes, *, validate: bool = True) -> Catalog:
    """Parse a catalog. With ``validate`` every bench must pass validation, else the first finding's code is raised."""
    doc = _loads(document, "catalog")
    _check_schema(doc, "catalog")
    catalog = _structure(_catalog_from, doc)
    if validate:
        report = validate_catalog(catalog)
        if not report.ok:
            first = report.findings[0]
            raise BenchAssignError(first.code, f"{first.subject}: {first.message}", findings=report.findings)
    return catalog


def _catalog_from(doc: Mapping[str, Any]) -> Catalog:
    executor = None
    if "executor" in doc:
        raw = doc["executor"]
        executor = ExecutorSpec(
            _ego_mode_from(raw["ego_mode"]), float(raw.get("step", DEFAULT_STEP)), float(raw.get("duration", DEFAULT_DURATION))
        )
    return Catalog(
        benches=tuple(_bench_from(b) for b in doc["benches"]),
        test_cases=tuple(_test_case_from(t) for t in doc["test_cases"]),
        requirements=_requirements_from(doc["requirements"]),
        options=_options_from(doc["options"]),
        executor=executor,
    )


def emit_catalog(catalog: Catalog) -> str:
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": "catalog",
        "benches": [_bench_to(b) for b in catalog.benches],
        "requirements": _requirements_to(catalog.requirements),
        "test_cases": [_test_case_to(t) for t in catalog.test_cases],
        "options": _options_to(catalog.options),
    }
    if catalog.executor is not None:
        spec = catalog.executor
        doc["executor"] = {"kind": spec.kind, "ego_mode": _ego_mode_to(spec.ego_mode), "step": spec.step, "duration": spec.duration}
    return _dumps(doc)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


def parse_trace(document: str | bytes) -> ExecutionTrace:
    doc = _loads(document, "trace")
    _check_schema(doc, "trace")
    try:
        return ExecutionTrace(doc["step"], doc["series"], doc["units"], doc["test_case_id"], doc["tbc_id"])
    except BenchAssignError as exc:
        raise BenchAssignError("MALFORMED_TRACE", exc.message) from None


def emit_trace(trace: ExecutionTrace) -> str:
    return _dumps(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "trace",
            "test_case_id": trace.test_case_id,
            "tbc_id": trace.tbc_id,
            "step": trace.step,
            "units": dict(trace.units),
            "series": {q: list(v) for q, v in trace.series.items()},
        }
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _q(x: float) -> float:
    return quantize(x)


def _qpair(p: tuple[float, float] | None) -> list[float] | None:
    return None if p is None else [_q(p[0]), _q(p[1])]


def _qrequired_to(required: Mapping[str, Sequence[ValidityDomain]] | None) -> dict[str, Any] | None:
    if required is None:
        return None
    return {k: [{"quantity": d.quantity, "unit": d.unit, "lo": _q(d.lo), "hi": _q(d.hi)} for d in v] for k, v in required.items()}


def _label_to(label: ValidityLabel) -> dict[str, Any]:
    return {
        "element_id": label.element_id,
        "verdict": label.verdict.value,
        "reasons": [
            {
                "quantity": r.quantity,
                "unit": r.unit,
                "required": _qpair(r.required),
                "provided": _qpair(r.provided),
                "basis": r.basis,
            }
            for r in label.reasons
        ],
    }


def _label_from(raw: Mapping[str, Any]) -> ValidityLabel:
    reasons = tuple(
        ValidityReason(r["quantity"], r["unit"], _pair(r["required"]), _pair(r["provided"]), r["basis"])
        for r in raw["reasons"]
    )
    return ValidityLabel(raw["element_id"], raw["verdict"], reasons)


def _summary_to(s: TraceSummary) -> dict[str, Any]:
    return {
        "test_case_id": s.test_case_id,
        "tbc_id": s.tbc_id,
        "step": _q(s.step),
        "n_samples": s.n_samples,
        "hulls": {q: {"unit": h.unit, "lo": _q(h.lo), "hi": _q(h.hi)} for q, h in s.hulls.items()},
        "criteria": {c: {"passed": r.passed, "witness": _q(r.witness)} for c, r in s.criteria.items()},
    }


def _summary_from(raw: Mapping[str, Any]) -> TraceSummary:
    return TraceSummary(
        raw["test_case_id"],
        raw["tbc_id"],
        float(raw["step"]),
        int(raw["n_samples"]),
        {q: QuantityHull(h["unit"], float(h["lo"]), float(h["hi"])) for q, h in sorted(raw["hulls"].items())},
        {c: CriterionResult(bool(r["passed"]), float(r["witness"])) for c, r in sorted(raw["criteria"].items())},
    )


def _violation_to(v: Violation) -> dict[str, Any]:
    return {
        "dimension": v.dimension,
        "element_id": v.element_id,
        "quantity": v.quantity,
        "unit": v.unit,
        "observed": _qpair(v.observed),
        "declared": _qpair(v.declared),
    }


def _violation_from(raw: Mapping[str, Any]) -> Violation:
    return Violation(
        raw["dimension"], raw["element_id"], raw["quantity"], raw["unit"], _pair(raw["observed"]), _pair(raw["declared"])
    )


def _iteration_to(r: IterationRecord) -> dict[str, Any]:
    def opt(value, fn):
        return None if value is None else fn(value)

    return {
        "index": r.index,
        "suitable_benches": list(r.suitable_benches),
        "required_validity": _qrequired_to(r.required_validity),
        "validity_labels": opt(r.validity_labels, lambda m: {b: [_label_to(x) for x in ls] for b, ls in m.items()}),
        "valid_configurations": opt(r.valid_configurations, lambda cs: [_tbc_to(c, with_bench=True) for c in cs]),
        "costed_configurations": opt(
            r.costed_configurations,
            lambda cs: [
                {
                    "tbc_id": c.tbc.id,
                    "bench_id": c.tbc.bench_id,
                    "cost": _q(c.cost),
                    "breakdown": {k: _q(v) for k, v in c.breakdown.items()},
                }
                for c in cs
            ],
        ),
        "selected": r.selected,
        "trace_summary": opt(r.trace_summary, _summary_to),
        "violations": opt(r.violations, lambda vs: [_violation_to(v) for v in vs]),
        "adapted_required_validity": _qrequired_to(r.adapted_required_validity),
    }


def _iteration_from(raw: Mapping[str, Any]) -> IterationRecord:
    valid = None
    if raw["valid_configurations"] is not None:
        valid = tuple(_tbc_from(c, c["bench_id"]) for c in raw["valid_configurations"])
    costed = None
    if raw["costed_configurations"] is not None:
        by_key = {(c.bench_id, c.id): c for c in valid or ()}
        costed = tuple(
            CostedConfiguration(by_key[(c["bench_id"], c["tbc_id"])], float(c["cost"]), {k: float(v) for k, v in c["breakdown"].items()})
            for c in raw["costed_configurations"]
        )
    labels = None
    if raw["validity_labels"] is not None:
        labels = {b: tuple(_label_from(x) for x in ls) for b, ls in raw["validity_labels"].items()}

    def req(key):
        return None if raw[key] is None else _required_from(raw[key])

    return IterationRecord(
        index=int(raw["index"]),
        suitable_benches=tuple(raw["suitable_benches"]),
        required_validity=req("required_validity"),
        validity_labels=labels,
        valid_configurations=valid,
        costed_configurations=costed,
        selected=raw["selected"],
        trace_summary=None if raw["trace_summary"] is None else _summary_from(raw["trace_summary"]),
        violations=None if raw["violations"] is None else tuple(_violation_from(v) for v in raw["violations"]),
        adapted_required_validity=req("adapted_required_validity"),
    )


def _report_to(report: AssignmentReport) -> dict[str, Any]:
    o = report.outcome
    return {
        "test_case_id": report.test_case_id,
        "iterations": [_iteration_to(r) for r in report.iterations],
        "outcome": {"kind": o.kind.value, "tbc_id": o.tbc_id, "verdict": o.verdict, "reason": o.reason},
    }


def _report_from(raw: Mapping[str, Any]) -> AssignmentReport:
    o = raw["outcome"]
    return AssignmentReport(
        raw["test_case_id"],
        tuple(_iteration_from(r) for r in raw["iterations"]),
        Outcome(o["kind"], o["tbc_id"], o["verdict"], o["reason"]),
    )


def emit_report(report: AssignmentReport, format: str = "structured") -> str:
    if format == "structured":
        return _dumps({"schema_version": SCHEMA_VERSION, "kind": "assignment_report", **_report_to(report)})
    if format == "human_text":
        return render_report_text(report)
    raise BenchAssignError("INVALID_FORMAT", f"unknown report format {format!r}")


def emit_reports(reports: Sequence[AssignmentReport], format: str = "structured") -> str:
    """Several reports in one document (one per test case, in the given order)."""
    if format == "structured":
        return _dumps(
            {"schema_version": SCHEMA_VERSION, "kind": "assignment_reports", "reports": [_report_to(r) for r in reports]}
        )
    if format == "human_text":
        return "\n".join(render_report_text(r) for r in reports)
    raise BenchAssignError("INVALID_FORMAT", f"unknown report format {format!r}")


def parse_report(document: str | bytes) -> AssignmentReport:
    return _structure(_report_from, _loads(document, "assignment_report"))


def parse_reports(document: str | bytes) -> tuple[AssignmentReport, ...]:
    doc = _loads(document, "assignment_reports")
    return _structure(lambda d: tuple(_report_from(r) for r in d["reports"]), doc)


# ---------------------------------------------------------------------------
# Human-readable report
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return f"{_q(x):.12g}"


def _interval(p: tuple[float, float] | None) -> str:
    return "empty" if p is None else f"[{_num(p[0])}, {_num(p[1])}]"


def _required_lines(required: Mapping[str, Sequence[ValidityDomain]]) -> list[str]:
    if not required:
        return ["(none)"]
    return [f"{k}: {d.quantity} {_interval(d.interval)} {d.unit}" for k, v in required.items() for d in v]


def render_report_text(report: AssignmentReport) -> str:
    pad = " " * 10
    lines = [f"Test case {report.test_case_id}"]
    for r in report.iterations:
        lines.append(f"Iteration {r.index}")
        lines.append(f"  Step 1  suitable test benches: {', '.join(r.suitable_benches) or '(none)'}")
        if r.required_validity is None:
            continue
        req = _required_lines(r.required_validity)
        lines.append(f"  Step 2  required validity: {req[0]}")
        lines += [f"{pad}{' ' * 19}{x}" for x in req[1:]]
        for bench_id, labels in (r.validity_labels or {}).items():
            bad = [x for x in labels if not x.sufficient]
            lines.append(f"{pad}{bench_id}: {len(labels) - len(bad)} sufficiently valid, {len(bad)} insufficiently valid")
            for label in labels:
                for reason in label.reasons:
                    lines.append(
                        f"{pad}  {label.element_id}: {reason.basis} {reason.quantity} "
                        f"required {_interval(reason.required)} provided {_interval(reason.provided) if reason.provided else 'undeclared'}"
                    )
        ids = [c.id for c in r.valid_configurations or ()]
        lines.append(f"  Step 3  valid configurations: {', '.join(ids) or '(none)'}")
        if r.costed_configurations is None:
            continue
        costs = ", ".join(f"{c.tbc.id} {_num(c.cost)}" for c in r.costed_configurations)
        lines.append(f"  Step 4  cost values: {costs}")
        lines.append(f"  Step 5  selected: {r.selected}")
        if r.trace_summary is None:
            continue
        s = r.trace_summary
        lines.append(f"  Step 6  executed {s.n_samples} samples at {_num(s.step)} s")
        for q, h in s.hulls.items():
            lines.append(f"{pad}{q} {_interval((h.lo, h.hi))} {h.unit}")
        for c, res in s.criteria.items():
            lines.append(f"{pad}{c}: {'passed' if res.passed else 'failed'} (witness {_num(res.witness)})")
        if not r.violations:
            lines.append("  Step 7  no element left its validity domain")
        else:
            lines.append("  Step 7  violations:")
            for v in r.violations:
                lines.append(
                    f"{pad}{v.element_id} ({v.dimension}) {v.quantity} observed {_interval(v.observed)} "
                    f"declared {_interval(v.declared)} {v.unit}"
                )
        if r.adapted_required_validity is not None:
            req = _required_lines(r.adapted_required_validity)
            lines.append(f"  Step 8  adapted required validity: {req[0]}")
            lines += [f"{pad}{' ' * 27}{x}" for x in req[1:]]
    o = report.outcome
    tail = f"Outcome: {o.kind.value}"
    if o.tbc_id:
        tail += f", {o.tbc_id}"
    if o.verdict:
        tail += f", criteria {o.verdict.replace('_', ' ')}"
    if o.reason:
        tail += f" ({o.reason})"
    lines.append(tail)
    return "\n".join(lines) + "\n"
