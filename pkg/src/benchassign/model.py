"""Classification vocabulary: dimensions, stages, elements, benches, configurations, test cases.

All types are frozen dataclasses. Collections are normalized to tuples (or
fresh dicts for mappings) on construction; treat every instance as a value.
Value-level invariants (an interval with ``lo > hi``, an unknown dimension id)
raise immediately. Bench-level invariants are reported as findings by
:func:`validate_test_bench` so that a broken bench can still be inspected.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, Union

from benchassign.errors import BenchAssignError

CANONICAL_DIMENSIONS: tuple[str, ...] = (
    "scenery",
    "movable_objects",
    "environmental_conditions",
    "v2x_communication",
    "test_object",
    "environment_perception_sensors",
    "localization_sensors",
    "vehicle_dynamics",
    "driver_user_behavior",
    "residual_vehicle",
)

UNITS: frozenset[str] = frozenset({"m/s²", "m", "s", "km/h"})


class Stage(str, Enum):
    """Nominal scale. Compare with ``==`` only; there is no ordering."""

    SIMULATED = "simulated"
    EMULATED = "emulated"
    REAL = "real"

    # the str mixin would otherwise order stages alphabetically
    def __lt__(self, other):
        return NotImplemented

    __le__ = __gt__ = __ge__ = __lt__


# Plot coordinate per stage. Only radar_viz reads this.
STAGE_COORDINATES: dict[Stage, int] = {Stage.SIMULATED: 1, Stage.EMULATED: 2, Stage.REAL: 3}


class PortDirection(str, Enum):
    PROVIDES = "provides"
    REQUIRES = "requires"


class Layer(str, Enum):
    """Six-layer scenario model."""

    L1 = "L1"  # road level
    L2 = "L2"  # traffic infrastructure
    L3 = "L3"  # temporary manipulation of L1 and L2
    L4 = "L4"  # movable objects
    L5 = "L5"  # environmental conditions
    L6 = "L6"  # data and communication


def _identifier(value: str, what: str) -> str:
    if not isinstance(value, str) or not value or value != value.strip() or "/" in value:
        raise BenchAssignError("INVALID_IDENTIFIER", f"bad {what}: {value!r}")
    return value


def _finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise BenchAssignError("INVALID_NUMBER", f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class Dimension:
    """A canonical dimension, optionally refined by one sub-identifier."""

    id: str
    refinement: str | None = None

    def __post_init__(self) -> None:
        if self.id not in CANONICAL_DIMENSIONS:
            raise BenchAssignError("UNKNOWN_DIMENSION", f"{self.id!r} is not a canonical dimension")
        if self.refinement is not None:
            _identifier(self.refinement, "refinement")

    @classmethod
    def parse(cls, key: str) -> Dimension:
        parts = key.split("/")
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        raise BenchAssignError("UNKNOWN_DIMENSION", f"refinement depth exceeds 2 in {key!r}")

    @property
    def key(self) -> str:
        return self.id if self.refinement is None else f"{self.id}/{self.refinement}"

    @property
    def parent(self) -> Dimension:
        return Dimension(self.id)

    def covers(self, other: Dimension) -> bool:
        """True if ``other`` is this dimension or one of its refinements."""
        return self == other or (self.refinement is None and other.id == self.id)

    def sort_key(self) -> tuple[int, str]:
        return CANONICAL_DIMENSIONS.index(self.id), self.refinement or ""

    def __str__(self) -> str:
        return self.key


def normalize_dimension_key(key: str | Dimension) -> str:
    if isinstance(key, Dimension):
        return key.key
    return Dimension.parse(key).key


@dataclass(frozen=True)
class ValidityDomain:
    """Closed interval ``[lo, hi]`` of one physical quantity."""

    quantity: str
    unit: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        _identifier(self.quantity, "quantity")
        if self.unit not in UNITS:
            raise BenchAssignError("INVALID_UNIT", f"unit {self.unit!r} not in {sorted(UNITS)}")
        object.__setattr__(self, "lo", _finite(self.lo, "lo"))
        object.__setattr__(self, "hi", _finite(self.hi, "hi"))
        if self.lo > self.hi:
            raise BenchAssignError("INVALID_INTERVAL", f"{self.quantity}: lo {self.lo} > hi {self.hi}")

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def contains(self, lo: float, hi: float) -> bool:
        return self.lo <= lo and hi <= self.hi


@dataclass(frozen=True)
class Port:
    name: str
    protocol: str
    direction: PortDirection

    def __post_init__(self) -> None:
        _identifier(self.name, "port name")
        _identifier(self.protocol, "port protocol")
        object.__setattr__(self, "direction", PortDirection(self.direction))

    def matches(self, other: Port) -> bool:
        return self.name == other.name and self.protocol == other.protocol


@dataclass(frozen=True)
class Element:
    """One implementation of a dimension at a bench.

    ``criterion_costs`` maps an evaluation-criterion id (time use, execution
    cost, ...) to the element's non-negative cost for that criterion.
    """

    id: str
    dimension: Dimension
    stage: Stage
    validity: tuple[ValidityDomain, ...] = ()
    expert_asserted_valid: bool = False
    ports: tuple[Port, ...] = ()
    criterion_costs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _identifier(self.id, "element id")
        if isinstance(self.dimension, str):
            object.__setattr__(self, "dimension", Dimension.parse(self.dimension))
        object.__setattr__(self, "stage", Stage(self.stage))
        object.__setattr__(self, "validity", tuple(self.validity))
        object.__setattr__(self, "ports", tuple(self.ports))
        costs = {}
        for criterion, cost in sorted(dict(self.criterion_costs).items()):
            cost = _finite(cost, f"cost of {criterion!r}")
            if cost < 0:
                raise BenchAssignError("INVALID_COST", f"{self.id}: negative cost for {criterion!r}")
            costs[criterion] = cost
        object.__setattr__(self, "criterion_costs", costs)

    def domain(self, quantity: str) -> ValidityDomain | None:
        for d in self.validity:
            if d.quantity == quantity:
                return d
        return None


@dataclass(frozen=True)
class ForbiddenStagePair:
    """No element of ``dimension_a`` at ``stage_a`` may be composed with one of ``dimension_b`` at ``stage_b``.

    A dimension given without refinement also matches all of its refinements.
    """

    kind: ClassVar[str] = "forbidden_stage_pair"

    dimension_a: Dimension
    stage_a: Stage
    dimension_b: Dimension
    stage_b: Stage

    def __post_init__(self) -> None:
        for name in ("dimension_a", "dimension_b"):
            value = getattr(self, name)
            if isinstance(value, str):
                object.__setattr__(self, name, Dimension.parse(value))
        object.__setattr__(self, "stage_a", Stage(self.stage_a))
        object.__setattr__(self, "stage_b", Stage(self.stage_b))

    def violated_by(self, elements: Iterable[Element]) -> bool:
        elements = list(elements)
        for a in elements:
            if not (self.dimension_a.covers(a.dimension) and a.stage == self.stage_a):
                continue
            for b in elements:
                if b is not a and self.dimension_b.covers(b.dimension) and b.stage == self.stage_b:
                    return True
        return False


class CouplingEffectKind(str, Enum):
    INVALIDATES = "invalidates"
    SHRINKS_DOMAIN = "shrinks_domain"


@dataclass(frozen=True)
class CouplingEffect:
    """Validity impact of composing ``element_a`` with ``element_b``.

    ``invalidates`` forbids the pair outright. ``shrinks_domain`` narrows
    ``element_a``'s domain for ``domain.quantity`` to its intersection with
    ``domain`` whenever both elements are selected.
    """

    kind: ClassVar[str] = "coupling_effect"

    element_a: str
    element_b: str
    effect: CouplingEffectKind
    domain: ValidityDomain | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "effect", CouplingEffectKind(self.effect))
        if (self.effect is CouplingEffectKind.SHRINKS_DOMAIN) != (self.domain is not None):
            raise BenchAssignError("INVALID_RULE", "shrinks_domain needs a domain, invalidates must not have one")

    def applies_to(self, element_ids: Iterable[str]) -> bool:
        ids = set(element_ids)
        return self.element_a in ids and self.element_b in ids


CouplingRule = Union[ForbiddenStagePair, CouplingEffect]


@dataclass(frozen=True)
class TestBenchConfiguration:
    """One element per leaf dimension of a bench (keys are dimension keys)."""

    __test__: ClassVar[bool] = False

    id: str
    bench_id: str
    selection: Mapping[str, str]
    cost_override: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise BenchAssignError("INVALID_IDENTIFIER", "configuration id is empty")
        selection = {normalize_dimension_key(k): v for k, v in dict(self.selection).items()}
        ordered = dict(sorted(selection.items(), key=lambda kv: Dimension.parse(kv[0]).sort_key()))
        object.__setattr__(self, "selection", ordered)
        if self.cost_override is not None:
            object.__setattr__(self, "cost_override", _finite(self.cost_override, "cost_override"))

    @property
    def element_ids(self) -> tuple[str, ...]:
        return tuple(self.selection.values())


def default_configuration_id(bench_id: str, element_ids: Iterable[str]) -> str:
    return f"{bench_id}:" + "+".join(sorted(element_ids))


@dataclass(frozen=True)
class TestBench:
    """A named set of elements.

    ``uncovered`` lists canonical dimensions the bench explicitly does not
    provide; every other canonical dimension needs at least one element.
    ``configurations`` holds named configurations (with optional expert cost
    overrides) that enumeration reuses when it derives the same selection.
    """

    __test__: ClassVar[bool] = False

    id: str
    elements: tuple[Element, ...]
    coupling_rules: tuple[CouplingRule, ...] = ()
    configurations: tuple[TestBenchConfiguration, ...] = ()
    uncovered: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        _identifier(self.id, "bench id")
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "coupling_rules", tuple(self.coupling_rules))
        object.__setattr__(self, "configurations", tuple(self.configurations))
        uncovered = frozenset(self.uncovered)
        for dim in uncovered:
            if dim not in CANONICAL_DIMENSIONS:
                raise BenchAssignError("UNKNOWN_DIMENSION", f"uncovered {dim!r} is not canonical")
        object.__setattr__(self, "uncovered", uncovered)

    def element(self, element_id: str) -> Element | None:
        for e in self.elements:
            if e.id == element_id:
                return e
        return None

    def elements_at(self, leaf: Dimension) -> list[Element]:
        return [e for e in self.elements if e.dimension == leaf]

    def leaf_dimensions(self) -> list[Dimension]:
        """Leaves in canonical order; refinements sit where their parent would."""
        leaves: list[Dimension] = []
        for dim_id in CANONICAL_DIMENSIONS:
            if dim_id in self.uncovered:
                continue
            refined = sorted(
                {e.dimension for e in self.elements if e.dimension.id == dim_id and e.dimension.refinement},
                key=Dimension.sort_key,
            )
            leaves.extend(refined or [Dimension(dim_id)])
        return leaves

    def configuration(self, tbc_id: str) -> TestBenchConfiguration | None:
        for c in self.configurations:
            if c.id == tbc_id:
                return c
        return None


@dataclass(frozen=True)
class TestObjectRequirements:
    """Stages the test object tolerates per dimension, plus ports it must be able to connect to."""

    __test__: ClassVar[bool] = False

    allowed_stages: Mapping[str, frozenset[Stage]] = field(default_factory=dict)
    required_ports: tuple[Port, ...] = ()

    def __post_init__(self) -> None:
        allowed = {dim: frozenset(Stage) for dim in CANONICAL_DIMENSIONS}
        for key, stages in dict(self.allowed_stages).items():
            stages = frozenset(Stage(s) for s in stages)
            if not stages:
                raise BenchAssignError("INVALID_REQUIREMENTS", f"no stage allowed for {key!r}")
            allowed[normalize_dimension_key(key)] = stages
        object.__setattr__(
            self,
            "allowed_stages",
            dict(sorted(allowed.items(), key=lambda kv: Dimension.parse(kv[0]).sort_key())),
        )
        object.__setattr__(self, "required_ports", tuple(self.required_ports))

    def allowed(self, dimension: Dimension) -> frozenset[Stage]:
        if dimension.key in self.allowed_stages:
            return self.allowed_stages[dimension.key]
        return self.allowed_stages[dimension.id]


@dataclass(frozen=True)
class ScenarioParameter:
    value: float
    unit: str
    layer: Layer

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _finite(self.value, "scenario parameter"))
        if self.unit not in UNITS:
            raise BenchAssignError("INVALID_UNIT", f"unit {self.unit!r} not in {sorted(UNITS)}")
        object.__setattr__(self, "layer", Layer(self.layer))


_COMPARATORS = {
    ">": lambda x, t: x > t,
    ">=": lambda x, t: x >= t,
    "<": lambda x, t: x < t,
    "<=": lambda x, t: x <= t,
}


@dataclass(frozen=True)
class EvaluationCriterion:
    """Threshold on the extremum of a trace quantity, e.g. ``min(distance) > 0 m``."""

    id: str
    quantity: str
    unit: str
    aggregate: str  # "min" | "max"
    comparator: str  # ">" | ">=" | "<" | "<="
    threshold: float

    def __post_init__(self) -> None:
        _identifier(self.id, "criterion id")
        _identifier(self.quantity, "quantity")
        if self.unit not in UNITS:
            raise BenchAssignError("INVALID_UNIT", f"unit {self.unit!r} not in {sorted(UNITS)}")
        if self.aggregate not in ("min", "max"):
            raise BenchAssignError("INVALID_CRITERION", f"aggregate {self.aggregate!r}")
        if self.comparator not in _COMPARATORS:
            raise BenchAssignError("INVALID_CRITERION", f"comparator {self.comparator!r}")
        object.__setattr__(self, "threshold", _finite(self.threshold, "threshold"))

    def holds(self, witness: float) -> bool:
        return _COMPARATORS[self.comparator](witness, self.threshold)

    def describe(self) -> str:
        return f"{self.aggregate}({self.quantity}) {self.comparator} {self.threshold:g} {self.unit}"


RequiredValidity = Mapping[str, tuple[ValidityDomain, ...]]


def normalize_required(required: Mapping[str, Iterable[ValidityDomain]]) -> dict[str, tuple[ValidityDomain, ...]]:
    """Canonical form: sorted dimension keys, domains sorted by quantity, one per quantity."""
    out: dict[str, tuple[ValidityDomain, ...]] = {}
    for key in sorted(required, key=lambda k: Dimension.parse(normalize_dimension_key(k)).sort_key()):
        domains = sorted(required[key], key=lambda d: d.quantity)
        quantities = [d.quantity for d in domains]
        if len(set(quantities)) != len(quantities):
            raise BenchAssignError("DUPLICATE_VALIDITY_QUANTITY", f"{key}: {quantities}")
        out[normalize_dimension_key(key)] = tuple(domains)
    return out


@dataclass(frozen=True)
class TestCase:
    """Scenario parameters (layer-tagged), evaluation criteria and required validity per dimension."""

    __test__: ClassVar[bool] = False

    id: str
    scenario_parameters: Mapping[str, ScenarioParameter]
    evaluation_criteria: tuple[EvaluationCriterion, ...]
    required_validity: RequiredValidity = field(default_factory=dict)

    def __post_init__(self) -> None:
        _identifier(self.id, "test case id")
        object.__setattr__(self, "scenario_parameters", dict(sorted(dict(self.scenario_parameters).items())))
        criteria = tuple(self.evaluation_criteria)
        if not criteria:
            raise BenchAssignError("INVALID_TEST_CASE", f"{self.id}: at least one evaluation criterion is required")
        object.__setattr__(self, "evaluation_criteria", criteria)
        object.__setattr__(self, "required_validity", normalize_required(self.required_validity))


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    @property
    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


def unresolved_ports(elements: Iterable[Element]) -> list[tuple[str, Port]]:
    """Required ports that no *other* element in the composition provides."""
    elements = list(elements)
    missing = []
    for e in elements:
        for port in e.ports:
            if port.direction is not PortDirection.REQUIRES:
                continue
            if not any(
                other is not e and p.direction is PortDirection.PROVIDES and p.matches(port)
                for other in elements
                for p in other.ports
            ):
                missing.append((e.id, port))
    return missing


def violated_rules(bench: TestBench, elements: Iterable[Element]) -> list[CouplingRule]:
    """Forbidden stage pairs and ``invalidates`` effects hit by a composition."""
    elements = list(elements)
    ids = [e.id for e in elements]
    hit: list[CouplingRule] = []
    for rule in bench.coupling_rules:
        if isinstance(rule, ForbiddenStagePair):
            if rule.violated_by(elements):
                hit.append(rule)
        elif rule.effect is CouplingEffectKind.INVALIDATES and rule.applies_to(ids):
            hit.append(rule)
    return hit


def validate_test_bench(bench: TestBench) -> ValidationReport:
    findings: list[Finding] = []

    seen: set[str] = set()
    for e in bench.elements:
        if e.id in seen:
            findings.append(Finding("DUPLICATE_ELEMENT_ID", e.id, f"element id {e.id!r} appears more than once"))
        seen.add(e.id)
        quantities = [d.quantity for d in e.validity]
        for q in sorted({q for q in quantities if quantities.count(q) > 1}):
            findings.append(Finding("DUPLICATE_VALIDITY_QUANTITY", e.id, f"more than one domain for {q!r}"))
        port_keys = [(p.name, p.direction) for p in e.ports]
        for name, direction in sorted({k for k in port_keys if port_keys.count(k) > 1}):
            findings.append(Finding("DUPLICATE_PORT", e.id, f"port {name!r} ({direction.value}) declared twice"))

    for dim_id in CANONICAL_DIMENSIONS:
        at_dim = [e for e in bench.elements if e.dimension.id == dim_id]
        if dim_id in bench.uncovered:
            if at_dim:
                findings.append(Finding("UNCOVERED_CONFLICT", dim_id, "declared uncovered but has elements"))
            continue
        if not at_dim:
            findings.append(Finding("UNCOVERED_DIMENSION", dim_id, "no element and not declared uncovered"))
        elif any(e.dimension.refinement is None for e in at_dim) and any(e.dimension.refinement for e in at_dim):
            findings.append(Finding("MIXED_REFINEMENT", dim_id, "elements at both the parent and a refinement"))

    for i, rule in enumerate(bench.coupling_rules):
        subject = f"rule[{i}]"
        if isinstance(rule, ForbiddenStagePair):
            for dim in (rule.dimension_a, rule.dimension_b):
                if not any(dim.covers(e.dimension) for e in bench.elements):
                    findings.append(Finding("DANGLING_RULE_REF", subject, f"dimension {dim.key!r} has no element"))
        else:
            for ref in (rule.element_a, rule.element_b):
                if ref not in seen:
                    findings.append(Finding("DANGLING_RULE_REF", subject, f"element {ref!r} does not exist"))

    config_ids: set[str] = set()
    for tbc in bench.configurations:
        if tbc.id in config_ids:
            findings.append(Finding("DUPLICATE_CONFIGURATION_ID", tbc.id, "configuration id appears more than once"))
        config_ids.add(tbc.id)
        if tbc.bench_id != bench.id:
            findings.append(Finding("UNKNOWN_BENCH", tbc.id, f"names bench {tbc.bench_id!r}, declared at {bench.id!r}"))
            continue
        findings.extend(validate_configuration(tbc, bench).findings)

    return ValidationReport(tuple(findings))


def validate_configuration(tbc: TestBenchConfiguration, bench: TestBench) -> ValidationReport:
    if tbc.bench_id != bench.id:
        raise BenchAssignError("UNKNOWN_BENCH", f"{tbc.id} names bench {tbc.bench_id!r}, got {bench.id!r}")
    findings: list[Finding] = []
    leaves = {d.key: d for d in bench.leaf_dimensions()}
    selected: list[Element] = []

    for key, element_id in tbc.selection.items():
        element = bench.element(element_id)
        if key not in leaves:
            findings.append(Finding("EXTRA_DIMENSION", tbc.id, f"{key!r} is not a leaf dimension of {bench.id}"))
        if element is None:
            findings.append(Finding("UNKNOWN_ELEMENT", tbc.id, f"{element_id!r} is not an element of {bench.id}"))
            continue
        if element.dimension.key != key:
            findings.append(
                Finding("DIMENSION_MISMATCH", tbc.id, f"{element_id!r} implements {element.dimension.key}, not {key}")
            )
        selected.append(element)

    for key in leaves:
        if key not in tbc.selection:
            findings.append(Finding("MISSING_DIMENSION", tbc.id, f"no element selected for {key!r}"))

    for rule in violated_rules(bench, selected):
        findings.append(Finding("COUPLING_VIOLATION", tbc.id, f"selection violates {rule!r}"))
    for element_id, port in unresolved_ports(selected):
        findings.append(
            Finding("UNRESOLVED_PORT", tbc.id, f"{element_id!r} requires {port.name}/{port.protocol}, nobody provides it")
        )
    if tbc.cost_override is not None and tbc.cost_override < 0:
        findings.append(Finding("INVALID_COST_OVERRIDE", tbc.id, "cost override must be non-negative"))

    return ValidationReport(tuple(findings))


EMPTY_INTERVAL = (math.inf, -math.inf)


def effective_validity(
    bench: TestBench, element: Element, selected_ids: Iterable[str]
) -> dict[str, tuple[str, float, float]]:
    """Element domains after ``shrinks_domain`` effects of the composition.

    Returns ``quantity -> (unit, lo, hi)``. An empty intersection comes back
    as ``(unit, inf, -inf)`` so that no interval is ever contained in it.
    Real elements are the reference and are never shrunk.
    """
    out = {d.quantity: (d.unit, d.lo, d.hi) for d in element.validity}
    if element.stage is Stage.REAL:
        return out
    selected_ids = set(selected_ids)
    for rule in bench.coupling_rules:
        if not (
            isinstance(rule, CouplingEffect)
            and rule.effect is CouplingEffectKind.SHRINKS_DOMAIN
            and rule.element_a == element.id
            and rule.applies_to(selected_ids)
        ):
            continue
        d = rule.domain
        if d.quantity not in out:
            out[d.quantity] = (d.unit, d.lo, d.hi)
            continue
        unit, lo, hi = out[d.quantity]
        if unit != d.unit:
            raise BenchAssignError("UNIT_MISMATCH", f"{element.id}/{d.quantity}: {unit} vs {d.unit}")
        lo, hi = max(lo, d.lo), min(hi, d.hi)
        out[d.quantity] = (unit, lo, hi) if lo <= hi else (unit, *EMPTY_INTERVAL)
    return out
