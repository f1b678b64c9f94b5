"""Pruned strategy enumeration, ranking, and parameter sweeps.

The search walks pipeline degree, tensor degree (powers of two up to the
server width), and micro batch (powers of two), keeping only placements
whose product matches the cluster and whose batch arithmetic is integral.
Memory bounds tighten the loops before any evaluation; an exhaustive mode
keeps every structurally valid candidate and serves as the pruning
oracle. The global batch is a user input, never searched: its value is a
model-quality trade-off that throughput alone cannot decide.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from . import memory
from .calibration import CalibrationTable
from .config import (HardwareConfig, ModelConfig, ParallelStrategy,
                     validate_strategy)
from .costmodel import TimeBreakdown, total_breakdown
from .errors import Infeasible, InvalidValue, NoFeasibleStrategy
from .memory import MemoryEstimate

SWEEP_PARAMETERS = ("global_batch", "micro_batch")

# consecutive strictly-worse micro-batch steps before the b loop exits;
# justified by the single interior optimum of the b trade-off
EARLY_STOP_PATIENCE = 2


@dataclass(frozen=True)
class PlanRequest:
    hardware: HardwareConfig
    model: ModelConfig
    calibration: CalibrationTable
    global_batch_size: int
    samples: int
    top_k: int = 5
    prune: bool = True

    def __post_init__(self):
        if not isinstance(self.global_batch_size, int) or self.global_batch_size < 1:
            raise InvalidValue(
                f"global batch size must be ≥ 1, got {self.global_batch_size!r}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise InvalidValue(f"samples must be ≥ 1, got {self.samples!r}")
        if not isinstance(self.top_k, int) or self.top_k < 1:
            raise InvalidValue(f"top_k must be ≥ 1, got {self.top_k!r}")


@dataclass(frozen=True)
class PlanEntry:
    strategy: ParallelStrategy
    breakdown: TimeBreakdown
    memory: MemoryEstimate
    short_pipeline: bool  # m < p: bubble closed form outside its regime


@dataclass(frozen=True)
class RankedPlan:
    entries: tuple[PlanEntry, ...]
    candidates_enumerated: int  # evaluated
    candidates_pruned: int      # structurally valid but skipped
    search_duration: float      # wall seconds, excluded from serialization

    @property
    def best(self) -> PlanEntry:
        return self.entries[0]


def _power_of_two_range(limit: int):
    value = 1
    while value <= limit:
        yield value
        value *= 2


def _structural_groups(hardware: HardwareConfig, model: ModelConfig,
                       global_batch: int, ceiling: int = memory.B_MAX_CEILING):
    """Yield (p, t, d, micro_batches) satisfying the integer constraints."""
    n = hardware.npu_count
    for p in range(1, min(n, model.num_layers) + 1):
        for t in _power_of_two_range(hardware.npus_per_server):
            if p * t > n or n % (p * t) != 0:
                continue
            d = n // (p * t)
            bs = [b for b in _power_of_two_range(min(ceiling, global_batch // d))
                  if global_batch % (b * d) == 0]
            if bs:
                yield p, t, d, bs


def _bounded_groups(req: PlanRequest):
    """Structural groups with memory-bound pruning applied when requested.

    Returns (groups, structural_total) where each group is
    (p, t, d, kept_bs, structural_b_count).
    """
    hw, model = req.hardware, req.model
    structural_total = 0
    groups = []
    bounds = None
    if req.prune:
        try:
            bounds = memory.feasibility_bounds(hw, model, 1)
        except Infeasible as exc:
            raise NoFeasibleStrategy(str(exc)) from exc
    for p, t, d, bs in _structural_groups(hw, model, req.global_batch_size):
        structural_total += len(bs)
        if bounds is not None:
            if bounds.t_min is None or t < bounds.t_min:
                continue
            p_floor = bounds.p_min(t)
            if p_floor is None or p < p_floor:
                continue
            cap = memory.b_max(hw, model, p, t)
            kept = [b for b in bs if b <= cap]
        else:
            kept = bs
        if kept:
            groups.append((p, t, d, kept, len(bs)))
    return groups, structural_total


def _strategy(p, t, d, b, global_batch) -> ParallelStrategy:
    return ParallelStrategy(
        data_parallel=d, tensor_parallel=t, pipeline_parallel=p,
        micro_batch_size=b, micro_steps=global_batch // (b * d),
        global_batch_size=global_batch)


def enumerate_candidates(req: PlanRequest) -> list[ParallelStrategy]:
    """Every candidate the planner would evaluate, in loop order.

    Memory-infeasible placements are dropped in both modes; the bound
    pruning narrows the loops first when req.prune is set.
    """
    groups, _ = _bounded_groups(req)
    out = []
    for p, t, d, bs, _ in groups:
        for b in bs:
            candidate = _strategy(p, t, d, b, req.global_batch_size)
            if memory.is_oom(req.hardware, req.model, candidate):
                continue
            out.append(candidate)
    if not out:
        raise NoFeasibleStrategy(
            "no strategy satisfies the structural and memory constraints")
    return out


def _rank_key(entry: PlanEntry):
    s = entry.strategy
    # ties prefer wider tensor parallelism, then shallower pipelines
    return (entry.breakdown.total_time, -s.tensor_parallel,
            s.pipeline_parallel, s.micro_batch_size)


def plan(req: PlanRequest) -> RankedPlan:
    """Evaluate the candidate space and rank by estimated total time."""
    started = time.perf_counter()
    groups, structural_total = _bounded_groups(req)
    entries: list[PlanEntry] = []
    evaluated = 0
    for p, t, d, bs, _ in groups:
        worsening = 0
        previous_total = None
        for b in bs:
            candidate = _strategy(p, t, d, b, req.global_batch_size)
            if memory.is_oom(req.hardware, req.model, candidate):
                continue
            breakdown = total_breakdown(req.hardware, req.model,
                                        req.calibration, candidate,
                                        samples=req.samples)
            evaluated += 1
            entries.append(PlanEntry(
                strategy=candidate,
                breakdown=breakdown,
                memory=memory.memory_estimate(req.model, candidate),
                short_pipeline=candidate.micro_steps < candidate.pipeline_parallel))
            if req.prune:
                if previous_total is not None and breakdown.total_time > previous_total:
                    worsening += 1
                else:
                    worsening = 0
                previous_total = breakdown.total_time
                if worsening >= EARLY_STOP_PATIENCE:
                    break
    if not entries:
        raise NoFeasibleStrategy(
            "no strategy satisfies the structural and memory constraints")
    entries.sort(key=_rank_key)
    return RankedPlan(
        entries=tuple(entries[:req.top_k]),
        candidates_enumerated=evaluated,
        candidates_pruned=structural_total - evaluated,
        search_duration=time.perf_counter() - started)


@dataclass(frozen=True)
class SweepPoint:
    value: int
    total_time: float | None
    throughput: float | None
    note: str  # "", "indivisible", or "oom"


def sweep(req: PlanRequest, base: ParallelStrategy, parameter: str,
          values: list[int]) -> list[SweepPoint]:
    """Evaluate the cost model along one batch axis, all else fixed.

    Values must be ascending positive integers. Entries whose batch
    arithmetic breaks are marked, not fatal; memory-overflowing points
    are evaluated (the time model does not depend on memory) but flagged.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise InvalidValue(
            f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    if not values:
        raise InvalidValue("sweep needs at least one value")
    for value in values:
        if not isinstance(value, int) or value < 1:
            raise InvalidValue(f"sweep values must be positive integers, got {value!r}")
    if any(b >= a for a, b in zip(values[1:], values)):
        raise InvalidValue("sweep values must be strictly ascending")
    report = validate_strategy(base, req.hardware, req.model)
    if not report.ok:
        raise InvalidValue("base strategy invalid: " + "; ".join(report.violations))

    points = []
    d = base.data_parallel
    for value in values:
        if parameter == "global_batch":
            g, b = value, base.micro_batch_size
        else:
            g, b = base.global_batch_size, value
        if g % (b * d) != 0:
            points.append(SweepPoint(value, None, None, "indivisible"))
            continue
        candidate = replace(base, global_batch_size=g, micro_batch_size=b,
                            micro_steps=g // (b * d))
        breakdown = total_breakdown(req.hardware, req.model, req.calibration,
                                    candidate, samples=req.samples)
        note = "oom" if memory.is_oom(req.hardware, req.model, candidate) else ""
        points.append(SweepPoint(value, breakdown.total_time,
                                 breakdown.throughput, note))
    return points
