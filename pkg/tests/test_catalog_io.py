from __future__ import annotations

import json

import pytest

from conftest import FIXTURE_NAMES, fixture_text, load_catalog
from benchassign.assignment import OutcomeKind, run_assignment
from benchassign.catalog_io import (
    emit_catalog,
    emit_report,
    emit_reports,
    emit_trace,
    parse_catalog,
    parse_report,
    parse_reports,
    parse_trace,
    validate_catalog,
)
from benchassign.errors import BenchAssignError
from benchassign.execution import CutInParams, LaneChange, simulate_cut_in
from benchassign.model import Dimension, TestObjectRequirements


def mutate(name: str, fn) -> str:
    doc = json.loads(fixture_text(name))
    fn(doc)
    return json.dumps(doc)


# ---------------------------------------------------------------------------
# Catalogs
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_round_trip(name):
    text = fixture_text(name)
    catalog = parse_catalog(text)
    assert emit_catalog(catalog) == text
    assert parse_catalog(emit_catalog(catalog)) == catalog


def test_hil_fixture_layout():
    (bench,) = load_catalog("hil_bench").benches
    assert len(bench.elements_at(Dimension("vehicle_dynamics"))) == 2
    refined = {e.dimension.refinement for e in bench.elements if e.dimension.id == "environment_perception_sensors"}
    assert refined == {"radar", "camera"}


def test_non_canonical_input_is_canonicalized():
    doc = json.loads(fixture_text("sil_bench"))
    for e in doc["benches"][0]["elements"]:
        for key in ("validity", "ports", "expert_asserted_valid"):
            if not e[key]:
                del e[key]
    del doc["benches"][0]["coupling_rules"]
    compact = json.dumps(doc, separators=(",", ":"), sort_keys=False)
    assert emit_catalog(parse_catalog(compact)) == fixture_text("sil_bench")


def test_emitted_text_is_utf8_lf():
    text = fixture_text("cut_in_example")
    assert "m/s²" in text
    assert "\r" not in text and text.endswith("\n")


def test_weights_rejected_on_load():
    text = mutate("cut_in_example", lambda d: d["options"].update(weights={"time_use": 0.7, "execution_cost": 0.7}))
    with pytest.raises(BenchAssignError) as exc:
        parse_catalog(text)
    assert exc.value.code == "INVALID_WEIGHTS"


def test_parse_error_reports_line():
    text = fixture_text("sil_bench").replace('"id": "SiL"', '"id": "SiL",,', 1)
    with pytest.raises(BenchAssignError) as exc:
        parse_catalog(text)
    assert exc.value.code == "PARSE_ERROR"
    assert exc.value.line == text[: text.index(",,")].count("\n") + 1


@pytest.mark.parametrize(
    "fn, code",
    [
        (lambda d: d.update(schema_version="tbc/2"), "SCHEMA_VERSION_UNSUPPORTED"),
        (lambda d: d.update(kind="trace"), "PARSE_ERROR"),
        (lambda d: d["benches"][0]["elements"][0].update(stage="virtual"), "PARSE_ERROR"),
        (lambda d: d["benches"][0]["elements"][0].update(dimension="warp_drive"), "UNKNOWN_DIMENSION"),
        (lambda d: d.pop("options"), "PARSE_ERROR"),
        (lambda d: d["benches"].append(d["benches"][0]), "DUPLICATE_BENCH_ID"),
        (
            lambda d: d["benches"][0]["coupling_rules"].append(
                {"kind": "coupling_effect", "element_a": "ghost", "element_b": "hil_v2x_sm", "effect": "invalidates"}
            ),
            "DANGLING_RULE_REF",
        ),
        (
            lambda d: d["benches"][0]["configurations"][0]["selection"].update(scenery="hil_v2x_sm"),
            "DIMENSION_MISMATCH",
        ),
    ],
)
def test_catalog_errors(fn, code):
    with pytest.raises(BenchAssignError) as exc:
        parse_catalog(mutate("cut_in_example", fn))
    assert exc.value.code == code


def test_validation_findings_travel_with_error():
    def dangle(d):
        d["benches"][0]["coupling_rules"] += [
            {"kind": "coupling_effect", "element_a": "ghost", "element_b": "hil_v2x_sm", "effect": "invalidates"},
            {"kind": "coupling_effect", "element_a": "hil_v2x_sm", "element_b": "phantom", "effect": "invalidates"},
        ]

    with pytest.raises(BenchAssignError) as exc:
        parse_catalog(mutate("cut_in_example", dangle))
    assert [f.code for f in exc.value.findings] == ["DANGLING_RULE_REF", "DANGLING_RULE_REF"]


def test_parse_without_validation():
    text = mutate("cut_in_example", lambda d: d["benches"].append(d["benches"][2]))
    catalog = parse_catalog(text, validate=False)
    assert validate_catalog(catalog).codes == ["DUPLICATE_BENCH_ID"]


def test_bytes_input():
    assert parse_catalog(fixture_text("sil_bench").encode("utf-8")) == load_catalog("sil_bench")


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


def test_trace_round_trip():
    t = simulate_cut_in(CutInParams(120, 130, -3, 20, LaneChange(3.5)))
    text = emit_trace(t)
    assert parse_trace(text) == t
    assert emit_trace(parse_trace(text)) == text


def test_trace_header():
    doc = json.loads(emit_trace(simulate_cut_in(CutInParams(120, 130, -3, 20, LaneChange(3.5)))))
    assert {"test_case_id", "tbc_id", "step", "units", "series"} <= set(doc)
    assert doc["kind"] == "trace"


def test_malformed_trace_document():
    text = json.dumps(
        {"schema_version": "tbc/1", "kind": "trace", "test_case_id": "", "tbc_id": "", "step": 0.1,
         "units": {"x": "m"}, "series": {"x": [1.0, 2.0], "y": [1.0, 2.0]}}
    )
    with pytest.raises(BenchAssignError) as exc:
        parse_trace(text)
    assert exc.value.code == "MALFORMED_TRACE"


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def report(example):
    return run_assignment(example.benches, example.requirements, example.test_cases[0], example.executor.build(), example.options)


def test_report_structured(report):
    doc = json.loads(emit_report(report))
    assert doc["kind"] == "assignment_report"
    assert len(doc["iterations"]) == 2
    assert doc["outcome"]["tbc_id"] == "HiL-TBC-2"


def test_report_round_trip(report):
    text = emit_report(report)
    assert parse_report(text) == report
    assert emit_report(parse_report(text)) == text


def test_report_bytes_stable(example, report):
    again = run_assignment(example.benches, example.requirements, example.test_cases[0], example.executor.build(), example.options)
    assert emit_report(again) == emit_report(report)


def test_abort_report_shape(example):
    reqs = TestObjectRequirements({"test_object": ["emulated"]})
    r = run_assignment(example.benches, reqs, example.test_cases[0], None, example.options, execute_limit=0)
    doc = json.loads(emit_report(r))
    assert doc["outcome"]["kind"] == "abort_no_suitable_bench"
    (only,) = doc["iterations"]
    assert only["suitable_benches"] == [] and only["valid_configurations"] is None
    assert parse_report(emit_report(r)) == r


def test_human_text_has_every_step(report):
    text = emit_report(report, "human_text")
    for step in range(1, 9):
        assert f"Step {step}" in text
    assert text.rstrip().endswith("Outcome: success, HiL-TBC-2, criteria passed")


def test_several_reports(report):
    text = emit_reports([report, report])
    assert parse_reports(text) == (report, report)


def test_unknown_format(report):
    with pytest.raises(BenchAssignError) as exc:
        emit_report(report, "yaml")
    assert exc.value.code == "INVALID_FORMAT"


def test_report_outcome_kinds_are_strings(report):
    assert report.outcome.kind is OutcomeKind.SUCCESS
    assert json.loads(emit_report(report))["outcome"]["kind"] == "success"
