from __future__ import annotations

import pytest

from benchassign.errors import BenchAssignError
from benchassign.model import (
    CANONICAL_DIMENSIONS,
    CouplingEffect,
    Dimension,
    Element,
    EvaluationCriterion,
    ForbiddenStagePair,
    Port,
    PortDirection,
    ScenarioParameter,
    Stage,
    TestBench,
    TestBenchConfiguration,
    TestCase,
    TestObjectRequirements,
    ValidityDomain,
    effective_validity,
    normalize_required,
    validate_configuration,
    validate_test_bench,
)

CAN_P = Port("bus", "can", PortDirection.PROVIDES)
CAN_R = Port("bus", "can", PortDirection.REQUIRES)


def full_bench(extra=(), **kw) -> TestBench:
    """One simulated element per canonical dimension, plus ``extra``."""
    elements = [Element(f"x_{d}", d, Stage.SIMULATED) for d in CANONICAL_DIMENSIONS]
    return TestBench("B", tuple(elements) + tuple(extra), **kw)


# ---------------------------------------------------------------------------
# Dimensions and value types
# ---------------------------------------------------------------------------


def test_ten_canonical_dimensions():
    assert len(CANONICAL_DIMENSIONS) == 10
    assert len(set(CANONICAL_DIMENSIONS)) == 10


@pytest.mark.parametrize(
    "key, expected",
    [
        ("vehicle_dynamics", Dimension("vehicle_dynamics")),
        ("environment_perception_sensors/radar", Dimension("environment_perception_sensors", "radar")),
    ],
)
def test_dimension_parse(key, expected):
    assert Dimension.parse(key) == expected
    assert expected.key == key


@pytest.mark.parametrize("key", ["warp_drive", "environment_perception_sensors/radar/long_range", "scenery/"])
def test_dimension_parse_rejects(key):
    with pytest.raises(BenchAssignError) as exc:
        Dimension.parse(key)
    assert exc.value.code in {"UNKNOWN_DIMENSION", "INVALID_IDENTIFIER"}


def test_dimension_covers_refinements_only_from_parent():
    parent = Dimension("environment_perception_sensors")
    radar = Dimension("environment_perception_sensors", "radar")
    assert parent.covers(radar)
    assert parent.covers(parent)
    assert not radar.covers(parent)
    assert not radar.covers(Dimension("environment_perception_sensors", "camera"))


def test_stage_has_no_order():
    with pytest.raises(TypeError):
        Stage.SIMULATED < Stage.REAL  # noqa: B015


@pytest.mark.parametrize(
    "args, code",
    [
        (("lateral_acceleration", "g", -1, 1), "INVALID_UNIT"),
        (("lateral_acceleration", "m/s²", 1, -1), "INVALID_INTERVAL"),
        (("lateral_acceleration", "m/s²", float("nan"), 1), "INVALID_NUMBER"),
    ],
)
def test_validity_domain_rejects(args, code):
    with pytest.raises(BenchAssignError) as exc:
        ValidityDomain(*args)
    assert exc.value.code == code


def test_validity_domain_contains_is_closed():
    d = ValidityDomain("lateral_acceleration", "m/s²", -3, 3)
    assert d.contains(-3, 3)
    assert not d.contains(-3.5, 3.5)
    assert not d.contains(-1, 3.0000001)


def test_element_normalizes():
    e = Element("e", "environment_perception_sensors/radar", "simulated", criterion_costs={"b": 1, "a": 2})
    assert e.dimension == Dimension("environment_perception_sensors", "radar")
    assert e.stage is Stage.SIMULATED
    assert list(e.criterion_costs) == ["a", "b"]


def test_element_rejects_negative_cost():
    with pytest.raises(BenchAssignError) as exc:
        Element("e", "scenery", Stage.REAL, criterion_costs={"t": -1})
    assert exc.value.code == "INVALID_COST"


def test_test_case_needs_a_criterion():
    with pytest.raises(BenchAssignError) as exc:
        TestCase("tc", {}, ())
    assert exc.value.code == "INVALID_TEST_CASE"


def test_scenario_parameter_layer_and_unit():
    p = ScenarioParameter(120, "km/h", "L4")
    assert p.layer.value == "L4"
    with pytest.raises(BenchAssignError):
        ScenarioParameter(1, "mph", "L4")


@pytest.mark.parametrize(
    "comparator, witness, threshold, holds",
    [(">", 0.0, 0.0, False), (">=", 0.0, 0.0, True), ("<", -1.0, 0.0, True), ("<=", 0.5, 0.0, False)],
)
def test_criterion_comparators(comparator, witness, threshold, holds):
    c = EvaluationCriterion("c", "distance_to_nearest_object", "m", "min", comparator, threshold)
    assert c.holds(witness) is holds


def test_normalize_required_rejects_duplicate_quantity():
    d = ValidityDomain("q", "m", 0, 1)
    with pytest.raises(BenchAssignError) as exc:
        normalize_required({"scenery": (d, d)})
    assert exc.value.code == "DUPLICATE_VALIDITY_QUANTITY"


def test_requirements_default_to_every_stage():
    reqs = TestObjectRequirements({"test_object": ["real"]})
    assert reqs.allowed(Dimension("test_object")) == {Stage.REAL}
    assert reqs.allowed(Dimension("environment_perception_sensors", "radar")) == set(Stage)


def test_requirements_refinement_overrides_parent():
    reqs = TestObjectRequirements({"environment_perception_sensors/radar": ["real"]})
    assert reqs.allowed(Dimension("environment_perception_sensors", "radar")) == {Stage.REAL}
    assert reqs.allowed(Dimension("environment_perception_sensors", "camera")) == set(Stage)


# ---------------------------------------------------------------------------
# Bench validation
# ---------------------------------------------------------------------------


def test_fixture_benches_validate(hil, tv, sil):
    for bench in (hil, tv, sil):
        assert validate_test_bench(bench).ok, validate_test_bench(bench).findings


def test_hil_layout(hil):
    # two vehicle-dynamics models, sensors refined into radar and camera
    assert len(hil.elements) == 12
    assert len(hil.elements_at(Dimension("vehicle_dynamics"))) == 2
    keys = [leaf.key for leaf in hil.leaf_dimensions()]
    assert len(keys) == 11
    assert "environment_perception_sensors" not in keys
    i = keys.index("environment_perception_sensors/camera")
    assert keys[i + 1] == "environment_perception_sensors/radar"


def test_every_element_in_one_cell(hil, tv, sil):
    for bench in (hil, tv, sil):
        leaves = set(bench.leaf_dimensions())
        for e in bench.elements:
            assert e.dimension in leaves
            assert isinstance(e.stage, Stage)


@pytest.mark.parametrize(
    "bench, code",
    [
        (full_bench([Element("x_scenery", "scenery", Stage.REAL)]), "DUPLICATE_ELEMENT_ID"),
        (TestBench("B", (Element("s", "scenery", Stage.REAL),)), "UNCOVERED_DIMENSION"),
        (full_bench([Element("r", "environment_perception_sensors/radar", Stage.REAL)]), "MIXED_REFINEMENT"),
        (full_bench(coupling_rules=(CouplingEffect("x_scenery", "ghost", "invalidates"),)), "DANGLING_RULE_REF"),
        (full_bench(uncovered={"scenery"}), "UNCOVERED_CONFLICT"),
    ],
)
def test_validate_test_bench_findings(bench, code):
    assert code in validate_test_bench(bench).codes


def test_uncovered_dimension_is_skipped():
    elements = [Element(f"x_{d}", d, Stage.SIMULATED) for d in CANONICAL_DIMENSIONS if d != "v2x_communication"]
    bench = TestBench("B", tuple(elements), uncovered={"v2x_communication"})
    assert validate_test_bench(bench).ok
    assert Dimension("v2x_communication") not in bench.leaf_dimensions()


# ---------------------------------------------------------------------------
# Configuration validation
# ---------------------------------------------------------------------------


def _selection(bench: TestBench) -> dict[str, str]:
    return {leaf.key: bench.elements_at(leaf)[0].id for leaf in bench.leaf_dimensions()}


def test_declared_configurations_validate(hil, tv):
    for bench in (hil, tv):
        for tbc in bench.configurations:
            assert validate_configuration(tbc, bench).ok


def test_configuration_missing_dimension():
    bench = full_bench()
    sel = _selection(bench)
    del sel["scenery"]
    assert "MISSING_DIMENSION" in validate_configuration(TestBenchConfiguration("c", "B", sel), bench).codes


def test_configuration_dimension_mismatch():
    bench = full_bench()
    sel = _selection(bench)
    sel["scenery"] = "x_test_object"
    assert "DIMENSION_MISMATCH" in validate_configuration(TestBenchConfiguration("c", "B", sel), bench).codes


def test_configuration_unresolved_port():
    bench = full_bench([Element("ecu", "test_object", Stage.REAL, ports=(CAN_R,))])
    sel = {**_selection(bench), "test_object": "ecu"}
    assert "UNRESOLVED_PORT" in validate_configuration(TestBenchConfiguration("c", "B", sel), bench).codes


def test_configuration_port_from_another_element():
    bus = Element("bus", "residual_vehicle", Stage.SIMULATED, ports=(CAN_P,))
    ecu = Element("ecu", "test_object", Stage.REAL, ports=(CAN_R,))
    bench = full_bench([bus, ecu])
    sel = {**_selection(bench), "test_object": "ecu", "residual_vehicle": "bus"}
    assert validate_configuration(TestBenchConfiguration("c", "B", sel), bench).ok


def test_configuration_self_provided_port_does_not_count():
    ecu = Element("ecu", "test_object", Stage.REAL, ports=(CAN_R, CAN_P))
    bench = full_bench([ecu])
    sel = {**_selection(bench), "test_object": "ecu"}
    assert "UNRESOLVED_PORT" in validate_configuration(TestBenchConfiguration("c", "B", sel), bench).codes


def test_configuration_forbidden_pair():
    rule = ForbiddenStagePair("test_object", Stage.SIMULATED, "scenery", Stage.SIMULATED)
    bench = full_bench(coupling_rules=(rule,))
    report = validate_configuration(TestBenchConfiguration("c", "B", _selection(bench)), bench)
    assert "COUPLING_VIOLATION" in report.codes


def test_configuration_wrong_bench():
    bench = full_bench()
    with pytest.raises(BenchAssignError) as exc:
        validate_configuration(TestBenchConfiguration("c", "other", _selection(bench)), bench)
    assert exc.value.code == "UNKNOWN_BENCH"


# ---------------------------------------------------------------------------
# Coupling effects on validity
# ---------------------------------------------------------------------------


def test_shrinks_domain_intersects():
    vd = Element("vd", "vehicle_dynamics", Stage.SIMULATED, validity=(ValidityDomain("lat", "m/s²", -8, 8),))
    shrink = CouplingEffect("vd", "x_scenery", "shrinks_domain", ValidityDomain("lat", "m/s²", -5, 10))
    bench = full_bench([vd], coupling_rules=(shrink,))
    assert effective_validity(bench, vd, ["vd", "x_scenery"])["lat"] == ("m/s²", -5, 8)
    assert effective_validity(bench, vd, ["vd"])["lat"] == ("m/s²", -8, 8)


def test_shrinks_domain_disjoint_is_empty():
    vd = Element("vd", "vehicle_dynamics", Stage.SIMULATED, validity=(ValidityDomain("lat", "m/s²", -1, 1),))
    shrink = CouplingEffect("vd", "x_scenery", "shrinks_domain", ValidityDomain("lat", "m/s²", 2, 3))
    bench = full_bench([vd], coupling_rules=(shrink,))
    _, lo, hi = effective_validity(bench, vd, ["vd", "x_scenery"])["lat"]
    assert lo > hi


def test_real_elements_are_never_shrunk():
    ecu = Element("ecu", "test_object", Stage.REAL, validity=(ValidityDomain("lat", "m/s²", -8, 8),))
    shrink = CouplingEffect("ecu", "x_scenery", "shrinks_domain", ValidityDomain("lat", "m/s²", -1, 1))
    bench = full_bench([ecu], coupling_rules=(shrink,))
    assert effective_validity(bench, ecu, ["ecu", "x_scenery"])["lat"] == ("m/s²", -8, 8)


def test_coupling_effect_domain_consistency():
    with pytest.raises(BenchAssignError):
        CouplingEffect("a", "b", "shrinks_domain")
    with pytest.raises(BenchAssignError):
        CouplingEffect("a", "b", "invalidates", ValidityDomain("q", "m", 0, 1))
