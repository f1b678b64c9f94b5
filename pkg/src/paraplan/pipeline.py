"""Discrete-event simulation of the 1F1B pipeline schedule.

Serves as the independent oracle for the analytical bubble closed form.
P2P transfers are zero-latency here on purpose: their cost is carried by
the analytical model, so the simulated bubble isolates the scheduling
effect alone.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidValue

TRACE_COLUMNS = ("stage", "kind", "micro_id", "start", "end")


@dataclass(frozen=True)
class StageTiming:
    """Per-micro-batch stage durations and the schedule dimensions.

    ``forward``/``backward`` may be scalars (uniform stages, the regime
    the closed form assumes) or per-stage sequences.
    """

    forward: float | Sequence[float]
    backward: float | Sequence[float]
    stages: int
    micro_batches: int

    def __post_init__(self):
        if not isinstance(self.stages, int) or self.stages < 1:
            raise InvalidValue(f"stages must be ≥ 1, got {self.stages!r}")
        if not isinstance(self.micro_batches, int) or self.micro_batches < 1:
            raise InvalidValue(f"micro_batches must be ≥ 1, got {self.micro_batches!r}")
        for name in ("forward", "backward"):
            for value in self.per_stage(name):
                if not value > 0:
                    raise InvalidValue(f"{name} durations must be > 0, got {value!r}")

    def per_stage(self, name: str) -> tuple[float, ...]:
        raw = getattr(self, name)
        if isinstance(raw, (int, float)):
            return (float(raw),) * self.stages
        values = tuple(float(v) for v in raw)
        if len(values) != self.stages:
            raise InvalidValue(
                f"{name} has {len(values)} entries for {self.stages} stages")
        return values

    @property
    def uniform(self) -> bool:
        return (len(set(self.per_stage("forward"))) == 1
                and len(set(self.per_stage("backward"))) == 1)


@dataclass(frozen=True)
class TraceEvent:
    stage: int
    kind: str  # "F" or "B"
    micro_id: int
    start: float
    end: float


@dataclass(frozen=True)
class ScheduleTrace:
    events: tuple[TraceEvent, ...]  # ordered by (stage, start)
    makespan: float
    bubble: float  # makespan minus the busiest stage's work


def _stage_sequence(stage: int, stages: int, micro_batches: int) -> list[tuple[str, int]]:
    """Operation order on one stage: warm-up forwards, 1F1B, cool-down."""
    warmup = min(micro_batches, stages - 1 - stage)
    order = [("F", i) for i in range(1, warmup + 1)]
    for i in range(warmup + 1, micro_batches + 1):
        order.append(("F", i))
        order.append(("B", i - warmup))
    order.extend(("B", i) for i in range(micro_batches - warmup + 1, micro_batches + 1))
    return order


def simulate_1f1b(timing: StageTiming) -> ScheduleTrace:
    """Event-accurate 1F1B trace under zero P2P latency.

    Each stage executes its fixed 1F1B order; a forward waits on the same
    micro batch's forward upstream, a backward on its backward downstream
    (or, at the last stage, on its own forward). The in-flight activation
    count per stage never exceeds min(p, m).
    """
    p, m = timing.stages, timing.micro_batches
    fwd = timing.per_stage("forward")
    bwd = timing.per_stage("backward")
    orders = [_stage_sequence(s, p, m) for s in range(p)]
    cursor = [0] * p
    clock = [0.0] * p
    f_end: dict[tuple[int, int], float] = {}
    b_end: dict[tuple[int, int], float] = {}
    events: list[TraceEvent] = []

    remaining = 2 * m * p
    while remaining:
        progressed = False
        for s in range(p):
            while cursor[s] < len(orders[s]):
                kind, micro = orders[s][cursor[s]]
                if kind == "F":
                    dep = 0.0 if s == 0 else f_end.get((s - 1, micro))
                else:
                    dep = (f_end.get((s, micro)) if s == p - 1
                           else b_end.get((s + 1, micro)))
                if dep is None:
                    break  # dependency not scheduled yet; revisit next sweep
                start = max(clock[s], dep)
                end = start + (fwd[s] if kind == "F" else bwd[s])
                (f_end if kind == "F" else b_end)[(s, micro)] = end
                events.append(TraceEvent(s, kind, micro, start, end))
                clock[s] = end
                cursor[s] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            raise AssertionError("1F1B schedule deadlocked; dependency order broken")

    makespan = max(event.end for event in events)
    busiest = max(m * (fwd[s] + bwd[s]) for s in range(p))
    events.sort(key=lambda e: (e.stage, e.start, e.kind))
    return ScheduleTrace(tuple(events), makespan, makespan - busiest)


def closed_form_bubble(timing: StageTiming) -> float:
    """Analytical bubble for uniform stages: per-step work times (p-1)/m."""
    fwd = timing.per_stage("forward")
    bwd = timing.per_stage("backward")
    per_step = timing.micro_batches * (fwd[0] + bwd[0])
    return per_step * (timing.stages - 1) / timing.micro_batches


def bubble_vs_closed_form(timing: StageTiming, epsilon: float = 1e-30) -> float:
    """Relative disagreement between simulated and closed-form bubble.

    Valid regime is uniform stages with m ≥ p; callers outside it get the
    error reported, not asserted.
    """
    simulated = simulate_1f1b(timing).bubble
    return abs(simulated - closed_form_bubble(timing)) / max(simulated, epsilon)


def max_in_flight(trace: ScheduleTrace, stage: int) -> int:
    """Peak count of activations held by a stage (forward start to backward end)."""
    intervals = {}
    for event in trace.events:
        if event.stage != stage:
            continue
        lo, hi = intervals.get(event.micro_id, (None, None))
        if event.kind == "F":
            intervals[event.micro_id] = (event.start, hi)
        else:
            intervals[event.micro_id] = (lo, event.end)
    edges = []
    for lo, hi in intervals.values():
        edges.append((lo, 1))
        edges.append((hi, -1))
    edges.sort()
    peak = live = 0
    for _, delta in edges:
        live += delta
        peak = max(peak, live)
    return peak


def trace_to_csv(trace: ScheduleTrace) -> str:
    """Delimited export for external plotting, one event per row."""
    out = io.StringIO()
    out.write(",".join(TRACE_COLUMNS) + "\n")
    for event in trace.events:
        out.write(f"{event.stage},{event.kind},{event.micro_id},"
                  f"{event.start!r},{event.end!r}\n")
    return out.getvalue()
