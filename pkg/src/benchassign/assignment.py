"""Assigning a test case to the cheapest sufficiently valid test bench configuration.

The loop:

1. keep the benches that can operate the test object,
2. label every element sufficiently or insufficiently valid for the required domains,
3. enumerate the compositions of sufficiently valid elements,
4. cost them, 5. pick the cheapest, 6. execute,
7. check the executed configuration against the recorded trace,
8. on a violation widen the required domains and go back to 2.

Step 1 runs once. Every step's output lands in an :class:`IterationRecord`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

from benchassign.costing import CostedConfiguration, WeightSet, configuration_cost, select_optimal
from benchassign.errors import BenchAssignError
from benchassign.execution import (
    CriterionResult,
    ExecutionTrace,
    Executor,
    Violation,
    evaluate_criteria,
    verify_validity,
)
from benchassign.model import (
    Dimension,
    Element,
    CouplingEffect,
    CouplingEffectKind,
    ForbiddenStagePair,
    PortDirection,
    RequiredValidity,
    Stage,
    TestBench,
    TestBenchConfiguration,
    TestCase,
    TestObjectRequirements,
    ValidityDomain,
    default_configuration_id,
    effective_validity,
    normalize_required,
    unresolved_ports,
)

QUANTUM_DIGITS = 12


def quantize(x: float) -> float:
    """Round to 1e-12 and fold -0.0 into 0.0 so reports serialize identically."""
    return round(float(x), QUANTUM_DIGITS) + 0.0


class Verdict(str, Enum):
    SUFFICIENTLY_VALID = "sufficiently_valid"
    INSUFFICIENTLY_VALID = "insufficiently_valid"


@dataclass(frozen=True)
class ValidityReason:
    """Why a required domain was or was not met.

    ``basis`` is ``not_contained`` or ``undeclared`` for failures, and
    ``expert_asserted`` when only the expert flag carried the element.
    """

    quantity: str
    unit: str
    required: tuple[float, float]
    provided: tuple[float, float] | None
    basis: str


@dataclass(frozen=True)
class ValidityLabel:
    element_id: str
    verdict: Verdict
    reasons: tuple[ValidityReason, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        object.__setattr__(self, "reasons", tuple(self.reasons))
        if self.verdict is Verdict.INSUFFICIENTLY_VALID and not self.reasons:
            raise BenchAssignError("INVALID_LABEL", f"{self.element_id}: insufficiently valid without a reason")

    @property
    def sufficient(self) -> bool:
        return self.verdict is Verdict.SUFFICIENTLY_VALID


@dataclass(frozen=True)
class AssignmentOptions:
    weights: WeightSet
    margin: float = 0.0
    max_iterations: int = 8

    def __post_init__(self) -> None:
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise BenchAssignError("INVALID_OPTIONS", f"margin must be >= 0, got {self.margin}")
        if isinstance(self.max_iterations, bool) or not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise BenchAssignError("INVALID_OPTIONS", f"max_iterations must be an integer >= 1, got {self.max_iterations!r}")


@dataclass(frozen=True)
class QuantityHull:
    unit: str
    lo: float
    hi: float


@dataclass(frozen=True)
class TraceSummary:
    """Test case results of one execution: observed hulls and criterion verdicts."""

    test_case_id: str
    tbc_id: str
    step: float
    n_samples: int
    hulls: Mapping[str, QuantityHull]
    criteria: Mapping[str, CriterionResult]

    @classmethod
    def of(cls, trace: ExecutionTrace, criteria: Mapping[str, CriterionResult]) -> TraceSummary:
        hulls = {}
        for q in trace.series:
            lo, hi = trace.hull(q)
            hulls[q] = QuantityHull(trace.units[q], quantize(lo), quantize(hi))
        crit = {cid: CriterionResult(r.passed, quantize(r.witness)) for cid, r in criteria.items()}
        return cls(trace.test_case_id, trace.tbc_id, quantize(trace.step), trace.n_samples, hulls, crit)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.criteria.values())


@dataclass(frozen=True)
class IterationRecord:
    """Artifacts of one pass; fields stay ``None`` for steps not reached."""

    index: int
    suitable_benches: tuple[str, ...]
    required_validity: RequiredValidity | None = None
    validity_labels: Mapping[str, tuple[ValidityLabel, ...]] | None = None
    valid_configurations: tuple[TestBenchConfiguration, ...] | None = None
    costed_configurations: tuple[CostedConfiguration, ...] | None = None
    selected: str | None = None
    trace_summary: TraceSummary | None = None
    violations: tuple[Violation, ...] | None = None
    adapted_required_validity: RequiredValidity | None = None


class OutcomeKind(str, Enum):
    SUCCESS = "success"
    PLANNED = "planned"
    ABORT_NO_SUITABLE_BENCH = "abort_no_suitable_bench"
    ABORT_NO_VALID_CONFIGURATION = "abort_no_valid_configuration"
    ABORT_ITERATION_CAP = "abort_iteration_cap"
    ABORT_NO_PROGRESS = "abort_no_progress"


@dataclass(frozen=True)
class Outcome:
    """``verdict`` is ``passed`` or ``criteria_failed`` on success; validity and verdict are independent."""

    kind: OutcomeKind
    tbc_id: str | None = None
    verdict: str | None = None
    reason: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", OutcomeKind(self.kind))

    @property
    def is_abort(self) -> bool:
        return self.kind.value.startswith("abort_")


@dataclass(frozen=True)
class AssignmentReport:
    test_case_id: str
    iterations: tuple[IterationRecord, ...]
    outcome: Outcome

    def __post_init__(self) -> None:
        object.__setattr__(self, "iterations", tuple(self.iterations))
        if self.outcome.kind is OutcomeKind.SUCCESS:
            if not self.iterations or self.iterations[-1].violations != ():
                raise BenchAssignError("INVALID_REPORT", "success requires a final iteration without violations")

    @property
    def final_tbc_id(self) -> str | None:
        return self.outcome.tbc_id


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


def suitable_benches(benches: Iterable[TestBench], reqs: TestObjectRequirements) -> list[TestBench]:
    """Step 1: benches offering an allowed stage at every leaf and every port the test object needs."""
    kept = []
    for bench in benches:
        stages_ok = all(
            any(e.stage in reqs.allowed(leaf) for e in bench.elements_at(leaf)) for leaf in bench.leaf_dimensions()
        )
        ports_ok = all(
            any(p.direction is PortDirection.PROVIDES and p.matches(need) for e in bench.elements for p in e.ports)
            for need in reqs.required_ports
        )
        if stages_ok and ports_ok:
            kept.append(bench)
    return kept


def required_for(required: RequiredValidity, dimension: Dimension) -> list[ValidityDomain]:
    """Required domains that apply to a leaf: its own entry plus its parent's."""
    keys = [dimension.key] + ([dimension.id] if dimension.refinement else [])
    return [d for k in keys for d in required.get(k, ())]


def classify_element_validity(bench: TestBench, required: RequiredValidity) -> list[ValidityLabel]:
    """Step 2."""
    labels = []
    for element in bench.elements:
        reasons = []
        failed = False
        for req in required_for(required, element.dimension):
            if element.stage is Stage.REAL:
                continue
            declared = element.domain(req.quantity)
            if declared is not None and declared.unit != req.unit:
                raise BenchAssignError("UNIT_MISMATCH", f"{element.id}/{req.quantity}: {declared.unit} vs {req.unit}")
            if declared is not None and declared.contains(req.lo, req.hi):
                continue
            provided = declared.interval if declared is not None else None
            if element.expert_asserted_valid:
                reasons.append(ValidityReason(req.quantity, req.unit, req.interval, provided, "expert_asserted"))
                continue
            failed = True
            basis = "undeclared" if declared is None else "not_contained"
            reasons.append(ValidityReason(req.quantity, req.unit, req.interval, provided, basis))
        verdict = Verdict.INSUFFICIENTLY_VALID if failed else Verdict.SUFFICIENTLY_VALID
        labels.append(ValidityLabel(element.id, verdict, tuple(reasons)))
    return labels


def _pair_conflict(rule: ForbiddenStagePair, e: Element, chosen: Sequence[Element]) -> bool:
    def at_a(x: Element) -> bool:
        return rule.dimension_a.covers(x.dimension) and x.stage == rule.stage_a

    def at_b(x: Element) -> bool:
        return rule.dimension_b.covers(x.dimension) and x.stage == rule.stage_b

    return (at_a(e) and any(at_b(c) for c in chosen)) or (at_b(e) and any(at_a(c) for c in chosen))


def _shrinks_hold(bench: TestBench, chosen: Sequence[Element], required: RequiredValidity) -> bool:
    ids = [e.id for e in chosen]
    by_id = {e.id: e for e in chosen}
    for rule in bench.coupling_rules:
        if not (
            isinstance(rule, CouplingEffect)
            and rule.effect is CouplingEffectKind.SHRINKS_DOMAIN
            and rule.applies_to(ids)
        ):
            continue
        target = by_id[rule.element_a]
        if target.stage is Stage.REAL:
            continue
        unit, lo, hi = effective_validity(bench, target, ids)[rule.domain.quantity]
        for req in required_for(required, target.dimension):
            if req.quantity == rule.domain.quantity and not (lo <= req.lo and req.hi <= hi):
                return False
    return True


def enumerate_valid_configurations(
    bench: TestBench,
    labels: Iterable[ValidityLabel],
    *,
    required: RequiredValidity | None = None,
    reqs: TestObjectRequirements | None = None,
) -> list[TestBenchConfiguration]:
    """Step 3: every composition of sufficiently valid elements that can be coupled.

    Backtracks over leaf dimensions, pruning on forbidden stage pairs and
    ``invalidates`` effects as soon as both partners are chosen; port
    resolution and ``shrinks_domain`` re-checks run on complete selections.
    ``reqs`` (optional) drops elements at stages the test object does not
    allow. A composition matching a configuration declared at the bench
    reuses its id and cost override.
    """
    labels = {label.element_id: label for label in labels}
    unlabelled = [e.id for e in bench.elements if e.id not in labels]
    if unlabelled:
        raise BenchAssignError("INCOMPLETE_LABELS", f"no validity label for {unlabelled}")

    leaves = bench.leaf_dimensions()
    candidates = []
    for leaf in leaves:
        pool = [
            e
            for e in bench.elements_at(leaf)
            if labels[e.id].sufficient and (reqs is None or e.stage in reqs.allowed(e.dimension))
        ]
        if not pool:
            return []
        candidates.append(sorted(pool, key=lambda e: e.id))

    pairs = [r for r in bench.coupling_rules if isinstance(r, ForbiddenStagePair)]
    invalidating = [
        r for r in bench.coupling_rules if isinstance(r, CouplingEffect) and r.effect is CouplingEffectKind.INVALIDATES
    ]
    declared = {tuple(sorted(c.selection.items())): c for c in bench.configurations}
    found: list[TestBenchConfiguration] = []
    chosen: list[Element] = []

    def extend(depth: int) -> None:
        if depth == len(leaves):
            if unresolved_ports(chosen):
                return
            if required is not None and not _shrinks_hold(bench, chosen, required):
                return
            selection = {leaf.key: e.id for leaf, e in zip(leaves, chosen)}
            match = declared.get(tuple(sorted(selection.items())))
            if match is None:
                match = TestBenchConfiguration(default_configuration_id(bench.id, selection.values()), bench.id, selection)
            found.append(match)
            return
        for e in candidates[depth]:
            if any(_pair_conflict(rule, e, chosen) for rule in pairs):
                continue
            ids = {c.id for c in chosen}
            if any(
                {r.element_a, r.element_b} <= ids | {e.id} and e.id in (r.element_a, r.element_b) for r in invalidating
            ):
                continue
            chosen.append(e)
            extend(depth + 1)
            chosen.pop()

    extend(0)
    return sorted(found, key=lambda c: c.id)


def adapt_required_domains(
    required: RequiredValidity, violations: Iterable[Violation], margin: float = 0.0
) -> dict[str, tuple[ValidityDomain, ...]]:
    """Step 8: replace each violated requirement by a symmetric interval around zero.

    The half-width is ``(1 + margin)`` times the largest magnitude among the
    old bounds and the observed hull. A requirement held by the parent of a
    refined dimension is widened where it lives; a quantity with no
    requirement yet is added under the violated dimension.
    """
    if not (math.isfinite(margin) and margin >= 0):
        raise BenchAssignError("INVALID_OPTIONS", f"margin must be >= 0, got {margin}")
    result = {k: {d.quantity: d for d in v} for k, v in normalize_required(required).items()}

    observed: dict[tuple[str, str], tuple[str, float, float]] = {}
    for v in violations:
        key = (v.dimension, v.quantity)
        lo, hi = v.observed
        if key in observed:
            _, lo0, hi0 = observed[key]
            lo, hi = min(lo, lo0), max(hi, hi0)
        observed[key] = (v.unit, lo, hi)

    for (dim_key, quantity), (unit, lo, hi) in sorted(observed.items()):
        dim = Dimension.parse(dim_key)
        home = dim.key
        if quantity not in result.get(dim.key, {}) and dim.refinement and quantity in result.get(dim.id, {}):
            home = dim.id
        old = result.get(home, {}).get(quantity)
        magnitudes = [abs(lo), abs(hi)]
        if old is not None:
            if old.unit != unit:
                raise BenchAssignError("UNIT_MISMATCH", f"{home}/{quantity}: {old.unit} vs {unit}")
            magnitudes += [abs(old.lo), abs(old.hi)]
        m = quantize((1.0 + margin) * max(magnitudes))
        result.setdefault(home, {})[quantity] = ValidityDomain(quantity, unit, -m, m)

    return normalize_required({k: tuple(v.values()) for k, v in result.items()})


# ---------------------------------------------------------------------------
# Loop
# ---------------------------------------------------------------------------


def _quantized_violation(v: Violation) -> Violation:
    declared = None if v.declared is None else (quantize(v.declared[0]), quantize(v.declared[1]))
    return replace(v, observed=(quantize(v.observed[0]), quantize(v.observed[1])), declared=declared)


def _quantized_cost(c: CostedConfiguration) -> CostedConfiguration:
    return CostedConfiguration(c.tbc, quantize(c.cost), {k: quantize(v) for k, v in c.breakdown.items()})


def run_assignment(
    benches: Sequence[TestBench],
    reqs: TestObjectRequirements,
    test_case: TestCase,
    executor: Executor | None,
    options: AssignmentOptions,
    *,
    execute_limit: int | None = None,
) -> AssignmentReport:
    """Run the assignment loop until a valid execution or an abort.

    ``execute_limit`` stops after that many executions: the next iteration
    runs Steps 2 to 5 only and the outcome is ``planned``. ``execute_limit=0``
    is a plan without any execution and needs no executor.
    """
    if executor is None and execute_limit != 0:
        raise BenchAssignError("INVALID_OPTIONS", "an executor is required unless execute_limit is 0")

    suitable = suitable_benches(benches, reqs)
    suitable_ids = tuple(b.id for b in suitable)
    if not suitable:
        return AssignmentReport(
            test_case.id,
            (IterationRecord(1, ()),),
            Outcome(OutcomeKind.ABORT_NO_SUITABLE_BENCH, reason="no test bench can operate the test object"),
        )

    by_id = {b.id: b for b in suitable}
    required = normalize_required(test_case.required_validity)
    records: list[IterationRecord] = []

    for index in range(1, options.max_iterations + 1):
        labels = {b.id: tuple(classify_element_validity(b, required)) for b in suitable}
        valid = tuple(
            tbc
            for b in suitable
            for tbc in enumerate_valid_configurations(b, labels[b.id], required=required, reqs=reqs)
        )
        record = IterationRecord(index, suitable_ids, required, labels, valid)
        if not valid:
            records.append(record)
            return AssignmentReport(
                test_case.id,
                tuple(records),
                Outcome(OutcomeKind.ABORT_NO_VALID_CONFIGURATION, reason="no sufficiently valid test bench configuration"),
            )

        costed = tuple(_quantized_cost(configuration_cost(t, by_id[t.bench_id], options.weights)) for t in valid)
        selected = select_optimal(costed)
        record = replace(record, costed_configurations=costed, selected=selected.id)

        if execute_limit is not None and index > execute_limit:
            records.append(record)
            return AssignmentReport(test_case.id, tuple(records), Outcome(OutcomeKind.PLANNED, tbc_id=selected.id))

        trace = executor.execute(test_case, selected)
        summary = TraceSummary.of(trace, evaluate_criteria(trace, test_case.evaluation_criteria))
        violations = tuple(_quantized_violation(v) for v in verify_validity(selected, by_id[selected.bench_id], trace))
        record = replace(record, trace_summary=summary, violations=violations)

        if not violations:
            records.append(record)
            verdict = "passed" if summary.passed else "criteria_failed"
            return AssignmentReport(
                test_case.id, tuple(records), Outcome(OutcomeKind.SUCCESS, tbc_id=selected.id, verdict=verdict)
            )

        adapted = adapt_required_domains(required, violations, options.margin)
        records.append(replace(record, adapted_required_validity=adapted))
        if adapted == required:
            return AssignmentReport(
                test_case.id,
                tuple(records),
                Outcome(
                    OutcomeKind.ABORT_NO_PROGRESS,
                    tbc_id=selected.id,
                    reason="adapting the required validity domains changed nothing",
                ),
            )
        required = adapted

    return AssignmentReport(
        test_case.id,
        tuple(records),
        Outcome(OutcomeKind.ABORT_ITERATION_CAP, reason=f"no valid execution within {options.max_iterations} iterations"),
    )


def plan_assignment(
    benches: Sequence[TestBench],
    reqs: TestObjectRequirements,
    test_case: TestCase,
    options: AssignmentOptions,
    *,
    executor: Executor | None = None,
    rounds: int = 0,
) -> AssignmentReport:
    """Steps 1 to 5, optionally after ``rounds`` executed-and-adapted iterations."""
    return run_assignment(benches, reqs, test_case, executor, options, execute_limit=rounds)
