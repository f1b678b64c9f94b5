"""Rendering and serialization of planner results.

JSON output is canonical (sorted keys, repr-exact floats) so identical
inputs produce identical bytes and every render parses back to an equal
object. Wall-clock search duration is deliberately left out of the wire
forms for that reason.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, fields

from .config import ParallelStrategy
from .costmodel import CoefficientSet, TimeBreakdown
from .errors import MalformedDocument
from .memory import MemoryEstimate
from .search import PlanEntry, RankedPlan, SweepPoint


def _from_mapping(cls, data, what: str):
    if not isinstance(data, dict):
        raise MalformedDocument(f"{what} must be a JSON object")
    names = [f.name for f in fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise MalformedDocument(f"unknown {what} field(s): {', '.join(unknown)}")
    missing = sorted(set(names) - set(data))
    if missing:
        raise MalformedDocument(f"{what} missing field(s): {', '.join(missing)}")
    return cls(**{name: data[name] for name in names})


def breakdown_to_dict(breakdown: TimeBreakdown) -> dict:
    return asdict(breakdown)


def breakdown_from_dict(data: dict) -> TimeBreakdown:
    return _from_mapping(TimeBreakdown, data, "time breakdown")


def render_breakdown_json(breakdown: TimeBreakdown) -> str:
    return json.dumps(breakdown_to_dict(breakdown), indent=2, sort_keys=True)


def parse_breakdown_json(text: str) -> TimeBreakdown:
    return breakdown_from_dict(json.loads(text))


def strategy_to_dict(strategy: ParallelStrategy) -> dict:
    return asdict(strategy)


def strategy_from_dict(data: dict) -> ParallelStrategy:
    return _from_mapping(ParallelStrategy, data, "strategy")


def plan_to_dict(ranked: RankedPlan) -> dict:
    return {
        "entries": [
            {
                "strategy": strategy_to_dict(entry.strategy),
                "breakdown": breakdown_to_dict(entry.breakdown),
                "memory": asdict(entry.memory),
                "short_pipeline": entry.short_pipeline,
            }
            for entry in ranked.entries
        ],
        "candidates_enumerated": ranked.candidates_enumerated,
        "candidates_pruned": ranked.candidates_pruned,
    }


def plan_from_dict(data: dict) -> RankedPlan:
    if not isinstance(data, dict):
        raise MalformedDocument("ranked plan must be a JSON object")
    try:
        entries = tuple(
            PlanEntry(
                strategy=strategy_from_dict(item["strategy"]),
                breakdown=breakdown_from_dict(item["breakdown"]),
                memory=_from_mapping(MemoryEstimate, item["memory"], "memory estimate"),
                short_pipeline=bool(item["short_pipeline"]),
            )
            for item in data["entries"]
        )
        return RankedPlan(
            entries=entries,
            candidates_enumerated=int(data["candidates_enumerated"]),
            candidates_pruned=int(data["candidates_pruned"]),
            search_duration=0.0,
        )
    except KeyError as exc:
        raise MalformedDocument(f"ranked plan missing field {exc}") from exc


def render_plan_json(ranked: RankedPlan) -> str:
    return json.dumps(plan_to_dict(ranked), indent=2, sort_keys=True)


def parse_plan_json(text: str) -> RankedPlan:
    return plan_from_dict(json.loads(text))


# --- human-readable tables ---------------------------------------------------

def _seconds(value: float) -> str:
    return f"{value:.6g}"


def _gib(value: float) -> str:
    return f"{value / 2**30:.3f}"


PLAN_COLUMNS = ("rank", "d", "t", "p", "b", "m", "total_s", "step_s",
                "compute_s", "comm_s", "bubble_s", "overlap_s",
                "samples_per_s", "mem_gib")


def render_plan_table(ranked: RankedPlan) -> str:
    out = io.StringIO()
    header = (f"{'rank':<5} {'d':<4} {'t':<4} {'p':<4} {'b':<5} {'m':<6} "
              f"{'total_s':<12} {'step_s':<12} {'compute_s':<12} {'comm_s':<12} "
              f"{'bubble_s':<12} {'overlap_s':<12} {'samples/s':<12} {'mem_GiB':<9}")
    out.write(header + "\n")
    out.write("-" * len(header) + "\n")
    for rank, entry in enumerate(ranked.entries, start=1):
        s, br = entry.strategy, entry.breakdown
        comm = br.tp_comm + br.tp_reduce_compute + br.dp_comm + br.dp_reduce_compute + br.pp_comm
        flag = " !m<p" if entry.short_pipeline else ""
        out.write(
            f"{rank:<5} {s.data_parallel:<4} {s.tensor_parallel:<4} "
            f"{s.pipeline_parallel:<4} {s.micro_batch_size:<5} {s.micro_steps:<6} "
            f"{_seconds(br.total_time):<12} {_seconds(br.step_time):<12} "
            f"{_seconds(br.compute):<12} {_seconds(comm):<12} "
            f"{_seconds(br.bubble):<12} {_seconds(br.overlap):<12} "
            f"{_seconds(br.throughput):<12} {_gib(entry.memory.per_npu):<9}{flag}\n")
    out.write(f"candidates evaluated: {ranked.candidates_enumerated}, "
              f"pruned: {ranked.candidates_pruned}\n")
    return out.getvalue()


def render_plan_csv(ranked: RankedPlan) -> str:
    out = io.StringIO()
    out.write(",".join(PLAN_COLUMNS) + "\n")
    for rank, entry in enumerate(ranked.entries, start=1):
        s, br = entry.strategy, entry.breakdown
        comm = br.tp_comm + br.tp_reduce_compute + br.dp_comm + br.dp_reduce_compute + br.pp_comm
        out.write(
            f"{rank},{s.data_parallel},{s.tensor_parallel},{s.pipeline_parallel},"
            f"{s.micro_batch_size},{s.micro_steps},{br.total_time!r},{br.step_time!r},"
            f"{br.compute!r},{comm!r},{br.bubble!r},{br.overlap!r},"
            f"{br.throughput!r},{entry.memory.per_npu / 2**30!r}\n")
    return out.getvalue()


_TERM_LABELS = (
    ("compute", "compute"),
    ("tp_comm", "TP all-reduce transfer"),
    ("tp_reduce_compute", "TP all-reduce arithmetic"),
    ("overlap", "hidden behind weight grads (subtracted)"),
    ("dp_comm", "DP gradient all-reduce"),
    ("dp_reduce_compute", "DP all-reduce arithmetic"),
    ("pp_comm", "pipeline point-to-point"),
    ("bubble", "pipeline bubble"),
)


def render_estimate_table(strategy: ParallelStrategy, breakdown: TimeBreakdown,
                          coefficients: CoefficientSet,
                          estimate: MemoryEstimate) -> str:
    out = io.StringIO()
    out.write(f"strategy {strategy.label()}  micro_steps={strategy.micro_steps}  "
              f"global_batch={strategy.global_batch_size}\n\n")
    out.write("per-step durations (s)\n")
    for field_name, label in _TERM_LABELS:
        out.write(f"  {label:<42} {_seconds(getattr(breakdown, field_name))}\n")
    out.write(f"  {'step total':<42} {_seconds(breakdown.step_time)}\n\n")
    out.write(f"run total: {_seconds(breakdown.total_time)} s   "
              f"throughput: {_seconds(breakdown.throughput)} samples/s\n\n")
    out.write("memory (GiB/NPU)\n")
    out.write(f"  {'weights':<16} {_gib(estimate.weights)}\n")
    out.write(f"  {'optimizer':<16} {_gib(estimate.optimizer)}\n")
    out.write(f"  {'activations':<16} {_gib(estimate.activations)}\n")
    out.write(f"  {'per-NPU need':<16} {_gib(estimate.per_npu)}\n\n")
    out.write("coefficients\n")
    for f in fields(CoefficientSet):
        out.write(f"  {f.name:<18} {getattr(coefficients, f.name)!r}\n")
    return out.getvalue()


def estimate_to_dict(strategy: ParallelStrategy, breakdown: TimeBreakdown,
                     coefficients: CoefficientSet,
                     estimate: MemoryEstimate) -> dict:
    return {
        "strategy": strategy_to_dict(strategy),
        "breakdown": breakdown_to_dict(breakdown),
        "coefficients": asdict(coefficients),
        "memory": asdict(estimate),
    }


SWEEP_COLUMNS = ("value", "total_time", "throughput", "note")


def sweep_to_csv(points: list[SweepPoint]) -> str:
    out = io.StringIO()
    out.write(",".join(SWEEP_COLUMNS) + "\n")
    for point in points:
        total = "" if point.total_time is None else repr(point.total_time)
        rate = "" if point.throughput is None else repr(point.throughput)
        out.write(f"{point.value},{total},{rate},{point.note}\n")
    return out.getvalue()
