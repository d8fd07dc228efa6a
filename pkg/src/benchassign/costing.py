"""Weighted cost values for elements and configurations, and argmin selection.

Element cost is the weighted sum of its per-criterion costs; a configuration
costs the sum of its elements, unless an expert override is set on the
configuration. :func:`schuldt_overall_cost` is the stage-indexed evaluation
function kept for comparison, with 1-based inclusive index ranges.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from benchassign.errors import BenchAssignError
from benchassign.model import Element, TestBench, TestBenchConfiguration

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class WeightSet:
    """Criterion weights; non-negative, at most 1 each, summing to 1."""

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        weights = dict(sorted(dict(self.weights).items()))
        if not weights:
            raise BenchAssignError("INVALID_WEIGHTS", "no criteria weighted")
        for criterion, a in weights.items():
            a = float(a)
            if not math.isfinite(a) or a < 0 or a > 1:
                raise BenchAssignError("INVALID_WEIGHTS", f"weight of {criterion!r} is {a}, must lie in [0, 1]")
            weights[criterion] = a
        total = math.fsum(weights.values())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise BenchAssignError("INVALID_WEIGHTS", f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class CostedConfiguration:
    tbc: TestBenchConfiguration
    cost: float
    breakdown: Mapping[str, float] = field(default_factory=dict)


def element_cost(element: Element, weights: WeightSet) -> float:
    terms = []
    for criterion, a in weights.weights.items():
        if criterion not in element.criterion_costs:
            raise BenchAssignError("MISSING_CRITERION_COST", f"element {element.id!r} has no cost for {criterion!r}")
        terms.append(a * element.criterion_costs[criterion])
    return math.fsum(terms)


def configuration_cost(tbc: TestBenchConfiguration, bench: TestBench, weights: WeightSet) -> CostedConfiguration:
    if tbc.bench_id != bench.id:
        raise BenchAssignError("UNKNOWN_BENCH", f"{tbc.id} names bench {tbc.bench_id!r}, got {bench.id!r}")
    if tbc.cost_override is not None:
        return CostedConfiguration(tbc, tbc.cost_override, {})
    breakdown: dict[str, float] = {}
    for element_id in tbc.element_ids:
        element = bench.element(element_id)
        if element is None:
            raise BenchAssignError("UNKNOWN_ELEMENT", f"{element_id!r} is not an element of {bench.id}")
        breakdown[element_id] = element_cost(element, weights)
    return CostedConfiguration(tbc, math.fsum(breakdown.values()), dict(sorted(breakdown.items())))


def select_optimal(costed: Sequence[CostedConfiguration]) -> TestBenchConfiguration:
    """Lowest cost wins; equal costs fall back to the lexicographically smallest id."""
    if not costed:
        raise BenchAssignError("EMPTY_SET", "no sufficiently valid test bench configuration to select from")
    return min(costed, key=lambda c: (c.cost, c.tbc.id)).tbc


@dataclass(frozen=True)
class SchuldtCostMatrix:
    """Per-stage, per-dimension, per-criterion cost values with criterion weights.

    ``k`` has shape ``(3, J, N)``; the accessor :meth:`entry` and the stage
    choice both use 1-based indices (stage 1 = simulated, 2 = emulated,
    3 = real).
    """

    k: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        k = np.array(self.k, dtype=float)
        a = np.array(self.a, dtype=float)
        if k.ndim != 3 or k.shape[0] != 3 or k.shape[1] < 1 or k.shape[2] < 1:
            raise BenchAssignError("INDEX_OUT_OF_RANGE", f"cost table must have shape (3, J, N), got {k.shape}")
        if a.shape != (k.shape[2],):
            raise BenchAssignError("INDEX_OUT_OF_RANGE", f"{a.shape[0] if a.ndim else 0} weights for {k.shape[2]} criteria")
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise BenchAssignError("INVALID_COST", "cost values must be finite and non-negative")
        if not np.all(np.isfinite(a)) or np.any(a < 0) or abs(math.fsum(a.tolist()) - 1.0) > WEIGHT_TOLERANCE:
            raise BenchAssignError("INVALID_WEIGHTS", f"weights {a.tolist()} must be non-negative and sum to 1")
        k.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "a", a)

    @property
    def n_dimensions(self) -> int:
        return self.k.shape[1]

    @property
    def n_criteria(self) -> int:
        return self.k.shape[2]

    def entry(self, stage: int, dimension: int, criterion: int) -> float:
        if not (1 <= stage <= 3 and 1 <= dimension <= self.n_dimensions and 1 <= criterion <= self.n_criteria):
            raise BenchAssignError("INDEX_OUT_OF_RANGE", f"k[{stage}][{dimension}][{criterion}]")
        return float(self.k[stage - 1, dimension - 1, criterion - 1])


def schuldt_overall_cost(matrix: SchuldtCostMatrix, stage_choice: Mapping[int, int]) -> float:
    """Overall cost ``G`` for one stage choice per dimension (both 1-based)."""
    J = matrix.n_dimensions
    if set(stage_choice) != set(range(1, J + 1)):
        raise BenchAssignError("INDEX_OUT_OF_RANGE", f"stage choice must cover dimensions 1..{J}, got {sorted(stage_choice)}")
    stages = np.array([stage_choice[j] for j in range(1, J + 1)])
    if np.any((stages < 1) | (stages > 3)):
        raise BenchAssignError("INDEX_OUT_OF_RANGE", f"stage indices must lie in 1..3, got {stages.tolist()}")
    per_criterion = matrix.k[stages - 1, np.arange(J), :].sum(axis=0)
    return float(per_criterion @ matrix.a)
