"""Executing a test case on a configuration, evaluating it, and checking validity afterwards.

Executors follow a small protocol: ``execute(test_case, tbc) -> ExecutionTrace``
plus a ``deterministic`` flag. Two are provided: :class:`ReplayExecutor`
re-emits a recorded trace, and :class:`CutInExecutor` runs the toy cut-in
kinematics of :func:`simulate_cut_in`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from typing import Protocol, Union

import numpy as np

from benchassign.errors import BenchAssignError
from benchassign.model import (
    UNITS,
    EvaluationCriterion,
    Stage,
    TestBench,
    TestBenchConfiguration,
    TestCase,
    effective_validity,
)

LONGITUDINAL_ACCELERATION = "longitudinal_acceleration"
LATERAL_ACCELERATION = "lateral_acceleration"
DISTANCE_TO_NEAREST_OBJECT = "distance_to_nearest_object"

DEFAULT_STEP = 0.01  # s
DEFAULT_DURATION = 20.0  # s


@dataclass(frozen=True)
class ExecutionTrace:
    """Uniformly sampled series, one per quantity, with units and run metadata."""

    step: float
    series: Mapping[str, tuple[float, ...]]
    units: Mapping[str, str]
    test_case_id: str = ""
    tbc_id: str = ""

    def __post_init__(self) -> None:
        try:
            step = float(self.step)
        except (TypeError, ValueError):
            raise BenchAssignError("MALFORMED_TRACE", f"step {self.step!r} is not a number") from None
        if not math.isfinite(step) or step <= 0:
            raise BenchAssignError("MALFORMED_TRACE", f"step must be positive, got {self.step!r}")
        object.__setattr__(self, "step", step)
        if not self.series:
            raise BenchAssignError("MALFORMED_TRACE", "trace has no series")
        series = {}
        for quantity in sorted(self.series):
            values = tuple(float(v) for v in self.series[quantity])
            if not all(math.isfinite(v) for v in values):
                raise BenchAssignError("MALFORMED_TRACE", f"{quantity}: non-finite sample")
            series[quantity] = values
        lengths = {len(v) for v in series.values()}
        if len(lengths) != 1 or lengths.pop() < 2:
            raise BenchAssignError("MALFORMED_TRACE", "series must share one length of at least 2 samples")
        units = dict(sorted(dict(self.units).items()))
        if set(units) != set(series):
            raise BenchAssignError("MALFORMED_TRACE", "every series needs exactly one unit annotation")
        for quantity, unit in units.items():
            if unit not in UNITS:
                raise BenchAssignError("MALFORMED_TRACE", f"{quantity}: unit {unit!r} not in {sorted(UNITS)}")
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "units", units)

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.series.values())))

    def hull(self, quantity: str) -> tuple[float, float]:
        values = self.series[quantity]
        return min(values), max(values)


class Executor(Protocol):
    deterministic: bool

    def execute(self, test_case: TestCase, tbc: TestBenchConfiguration) -> ExecutionTrace: ...


class ReplayExecutor:
    """Emits one recorded trace for every configuration, stamped with the current run's ids."""

    deterministic = True

    def __init__(self, trace: ExecutionTrace) -> None:
        self.trace = trace

    def execute(self, test_case: TestCase, tbc: TestBenchConfiguration) -> ExecutionTrace:
        return replace(self.trace, test_case_id=test_case.id, tbc_id=tbc.id)


def replay_executor(trace_document: str) -> ReplayExecutor:
    from benchassign.catalog_io import parse_trace

    return ReplayExecutor(parse_trace(trace_document))


# ---------------------------------------------------------------------------
# Cut-in scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Brake:
    """Ego brakes with a constant-jerk ramp to ``peak_deceleration``, holds, then releases."""

    peak_deceleration: float = 1.5  # m/s², magnitude
    ramp: float = 0.5  # s
    hold: float = 2.0  # s


@dataclass(frozen=True)
class LaneChange:
    """Ego changes to the neighbouring lane with a one-period sinusoidal lateral acceleration."""

    peak_lateral_acceleration: float  # m/s²


EgoMode = Union[Brake, LaneChange]


@dataclass(frozen=True)
class CutInParams:
    """Cut-in vehicle passes the ego on the left lane and merges in once ahead by ``trigger_distance``.

    Speeds are in km/h, distances in m. ``start_distance`` is measured from the
    ego's front bumper to the cut-in vehicle's rear bumper (negative: the
    cut-in vehicle is still alongside).
    """

    v_ego: float
    v_cut_in: float
    start_distance: float
    trigger_distance: float
    ego_mode: EgoMode = field(default_factory=Brake)
    lane_width: float = 3.5
    vehicle_length: float = 4.5
    vehicle_width: float = 1.8
    reaction_time: float = 0.5
    cut_in_peak_lateral_acceleration: float = 1.0

    def __post_init__(self) -> None:
        values = (
            self.v_ego, self.v_cut_in, self.start_distance, self.trigger_distance, self.lane_width,
            self.vehicle_length, self.vehicle_width, self.reaction_time, self.cut_in_peak_lateral_acceleration,
        )
        if not all(math.isfinite(v) for v in values):
            raise BenchAssignError("INVALID_PARAMS", "parameters must be finite")
        if self.v_cut_in <= self.v_ego:
            raise BenchAssignError("INVALID_PARAMS", "the cut-in vehicle must be faster than the ego vehicle")
        if self.v_ego < 0:
            raise BenchAssignError("INVALID_PARAMS", "ego speed must be non-negative")
        if self.trigger_distance <= 0:
            raise BenchAssignError("INVALID_PARAMS", "trigger distance must be positive")
        if self.start_distance >= self.trigger_distance:
            raise BenchAssignError("INVALID_PARAMS", "start distance must be below the trigger distance")
        if min(self.lane_width, self.vehicle_length, self.vehicle_width, self.cut_in_peak_lateral_acceleration) <= 0:
            raise BenchAssignError("INVALID_PARAMS", "geometry and cut-in acceleration must be positive")
        if self.vehicle_width >= self.lane_width or self.reaction_time < 0:
            raise BenchAssignError("INVALID_PARAMS", "vehicle must fit its lane; reaction time non-negative")
        mode = self.ego_mode
        if isinstance(mode, Brake):
            if not (0 < mode.peak_deceleration <= 2.0) or mode.ramp <= 0 or mode.hold < 0:
                raise BenchAssignError("INVALID_PARAMS", "brake: deceleration in (0, 2] m/s², ramp > 0, hold >= 0")
        elif isinstance(mode, LaneChange):
            if not (math.isfinite(mode.peak_lateral_acceleration) and mode.peak_lateral_acceleration > 0):
                raise BenchAssignError("INVALID_PARAMS", "lane change peak lateral acceleration must be positive")
        else:
            raise BenchAssignError("INVALID_PARAMS", f"unknown ego mode {mode!r}")


def _sinusoid_displacement(peak: float, period: float, tau: np.ndarray) -> np.ndarray:
    """Lateral offset under ``a(τ) = peak·sin(2πτ/period)``, starting at rest, held after ``period``."""
    tau = np.clip(tau, 0.0, period)
    w = 2 * math.pi / period
    return peak / w * (tau - np.sin(w * tau) / w)


def simulate_cut_in(params: CutInParams, step: float = DEFAULT_STEP, duration: float = DEFAULT_DURATION) -> ExecutionTrace:
    """Sample the cut-in scenario on a uniform grid.

    Both vehicles hold their speeds until the gap reaches the trigger distance.
    The cut-in vehicle then merges into the ego lane; after ``reaction_time``
    the ego either brakes (constant-jerk ramps) or changes lanes. The lane
    change period is rounded up to a multiple of four steps so the sinusoid
    peaks land on samples and the configured peak is reproduced exactly.
    """
    if not (math.isfinite(step) and 0 < step <= 0.1):
        raise BenchAssignError("INVALID_PARAMS", f"step must lie in (0, 0.1] s, got {step}")
    if not (math.isfinite(duration) and duration >= step):
        raise BenchAssignError("INVALID_PARAMS", f"duration {duration} s shorter than one step")

    n = int(math.floor(duration / step + 1e-9))
    i = np.arange(n + 1)
    t = i * step

    v_ego = params.v_ego / 3.6
    v_cut = params.v_cut_in / 3.6
    t_trigger = (params.trigger_distance - params.start_distance) / (v_cut - v_ego)
    i0 = int(math.ceil((t_trigger + params.reaction_time) / step - 1e-9))
    if i0 > n:
        raise BenchAssignError("INVALID_PARAMS", "duration ends before the ego reacts")

    lon = np.zeros(n + 1)
    lat = np.zeros(n + 1)
    y_ego = np.zeros(n + 1)
    mode = params.ego_mode

    if isinstance(mode, LaneChange):
        peak = mode.peak_lateral_acceleration
        m = 4 * int(math.ceil(math.sqrt(2 * math.pi * params.lane_width / peak) / (4 * step) - 1e-9))
        if i0 + m > n:
            raise BenchAssignError("INVALID_PARAMS", "duration does not cover the ego lane change")
        k = np.arange(m + 1)
        lat[i0 : i0 + m + 1] = peak * np.sin(math.tau * k / m)
        y_ego = _sinusoid_displacement(peak, m * step, t - i0 * step)
    else:
        r = max(1, int(round(mode.ramp / step)))
        h = int(round(mode.hold / step))
        if i0 + 2 * r + h > n:
            raise BenchAssignError("INVALID_PARAMS", "duration does not cover the braking manoeuvre")
        k = np.arange(2 * r + h + 1)
        profile = np.minimum.reduce([k / r, np.ones_like(k, dtype=float), (2 * r + h - k) / r])
        lon[i0 : i0 + 2 * r + h + 1] = -mode.peak_deceleration * profile

    # Acceleration is linear between samples (constant jerk), so each step integrates exactly.
    v = np.empty(n + 1)
    x_ego = np.empty(n + 1)
    v[0], x_ego[0] = v_ego, 0.0
    for j in range(n):
        a0, a1 = lon[j], lon[j + 1]
        v[j + 1] = v[j] + step * (a0 + a1) / 2
        x_ego[j + 1] = x_ego[j] + v[j] * step + step * step * (2 * a0 + a1) / 6

    x_cut = params.start_distance + v_cut * t
    cut_period = math.sqrt(2 * math.pi * params.lane_width / params.cut_in_peak_lateral_acceleration)
    y_cut = params.lane_width - _sinusoid_displacement(params.cut_in_peak_lateral_acceleration, cut_period, t - t_trigger)

    L, W = params.vehicle_length, params.vehicle_width
    dx = np.maximum.reduce([np.zeros(n + 1), x_cut - x_ego, (x_ego - L) - (x_cut + L)])
    dy = np.maximum(0.0, np.abs(y_cut - y_ego) - W)
    distance = np.hypot(dx, dy)

    return ExecutionTrace(
        step=step,
        series={
            LONGITUDINAL_ACCELERATION: tuple(lon.tolist()),
            LATERAL_ACCELERATION: tuple(lat.tolist()),
            DISTANCE_TO_NEAREST_OBJECT: tuple(distance.tolist()),
        },
        units={LONGITUDINAL_ACCELERATION: "m/s²", LATERAL_ACCELERATION: "m/s²", DISTANCE_TO_NEAREST_OBJECT: "m"},
    )


_PARAMETER_UNITS = {"v_E": "km/h", "v_C": "km/h", "d_s": "m", "d_sm": "m"}


def cut_in_params_from(test_case: TestCase, ego_mode: EgoMode) -> CutInParams:
    """Read ``v_E``, ``v_C``, ``d_s``, ``d_sm`` (and optional ``lane_width``) from a test case."""
    values = {}
    for name, unit in {**_PARAMETER_UNITS, "lane_width": "m"}.items():
        p = test_case.scenario_parameters.get(name)
        if p is None:
            if name == "lane_width":
                continue
            raise BenchAssignError("INVALID_PARAMS", f"test case {test_case.id} lacks scenario parameter {name!r}")
        if p.unit != unit:
            raise BenchAssignError("INVALID_PARAMS", f"{name} must be given in {unit}, got {p.unit}")
        values[name] = p.value
    extra = {"lane_width": values["lane_width"]} if "lane_width" in values else {}
    return CutInParams(values["v_E"], values["v_C"], values["d_s"], values["d_sm"], ego_mode, **extra)


class CutInExecutor:
    deterministic = True

    def __init__(self, ego_mode: EgoMode, step: float = DEFAULT_STEP, duration: float = DEFAULT_DURATION) -> None:
        self.ego_mode = ego_mode
        self.step = step
        self.duration = duration

    def execute(self, test_case: TestCase, tbc: TestBenchConfiguration) -> ExecutionTrace:
        trace = simulate_cut_in(cut_in_params_from(test_case, self.ego_mode), self.step, self.duration)
        return replace(trace, test_case_id=test_case.id, tbc_id=tbc.id)


# ---------------------------------------------------------------------------
# Evaluation and verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionResult:
    passed: bool
    witness: float


def evaluate_criteria(trace: ExecutionTrace, criteria: Iterable[EvaluationCriterion]) -> dict[str, CriterionResult]:
    results = {}
    for c in sorted(criteria, key=lambda c: c.id):
        if c.quantity not in trace.series:
            raise BenchAssignError("UNKNOWN_QUANTITY", f"criterion {c.id!r} reads {c.quantity!r}, absent from the trace")
        if trace.units[c.quantity] != c.unit:
            raise BenchAssignError("UNIT_MISMATCH", f"{c.quantity}: trace in {trace.units[c.quantity]}, criterion in {c.unit}")
        lo, hi = trace.hull(c.quantity)
        witness = lo if c.aggregate == "min" else hi
        results[c.id] = CriterionResult(c.holds(witness), witness)
    return results


@dataclass(frozen=True)
class Violation:
    """A selected element whose domain does not contain the observed hull.

    ``declared`` is ``None`` when coupling effects left the domain empty.
    """

    dimension: str
    element_id: str
    quantity: str
    unit: str
    observed: tuple[float, float]
    declared: tuple[float, float] | None


def verify_validity(tbc: TestBenchConfiguration, bench: TestBench, trace: ExecutionTrace) -> list[Violation]:
    if trace.tbc_id and trace.tbc_id != tbc.id:
        raise BenchAssignError("TRACE_MISMATCH", f"trace recorded on {trace.tbc_id!r}, checked against {tbc.id!r}")
    violations = []
    selected_ids = tbc.element_ids
    for element_id in selected_ids:
        element = bench.element(element_id)
        if element is None:
            raise BenchAssignError("UNKNOWN_ELEMENT", f"{element_id!r} is not an element of {bench.id}")
        if element.stage is Stage.REAL:
            continue
        for quantity, (unit, lo, hi) in sorted(effective_validity(bench, element, selected_ids).items()):
            if quantity not in trace.series:
                continue
            if trace.units[quantity] != unit:
                raise BenchAssignError("UNIT_MISMATCH", f"{quantity}: trace in {trace.units[quantity]}, domain in {unit}")
            obs_lo, obs_hi = trace.hull(quantity)
            if not (lo <= obs_lo and obs_hi <= hi):
                declared = (lo, hi) if lo <= hi else None
                violations.append(
                    Violation(element.dimension.key, element.id, quantity, unit, (obs_lo, obs_hi), declared)
                )
    return violations
