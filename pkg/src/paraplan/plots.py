"""Figure rendering for planner reports.

Figures are written straight to files next to the delimited output; no
interactive backend is ever required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .pipeline import ScheduleTrace
from .search import RankedPlan, SweepPoint

_STACK_FIELDS = (
    ("compute", "compute"),
    ("tp_comm", "TP comm"),
    ("tp_reduce_compute", "TP reduce"),
    ("dp_comm", "DP comm"),
    ("dp_reduce_compute", "DP reduce"),
    ("pp_comm", "P2P"),
    ("bubble", "bubble"),
)


def save_sweep_figure(points: list[SweepPoint], parameter: str, path: str) -> None:
    """Throughput and total time against the swept batch value."""
    usable = [p for p in points if p.total_time is not None]
    fig, (ax_time, ax_rate) = plt.subplots(1, 2, figsize=(9, 3.5))
    xs = [p.value for p in usable]
    ax_time.plot(xs, [p.total_time for p in usable], marker="o")
    ax_time.set_xlabel(parameter)
    ax_time.set_ylabel("total time (s)")
    ax_time.set_xscale("log", base=2)
    ax_rate.plot(xs, [p.throughput for p in usable], marker="o", color="tab:green")
    ax_rate.set_xlabel(parameter)
    ax_rate.set_ylabel("throughput (samples/s)")
    ax_rate.set_xscale("log", base=2)
    for ax in (ax_time, ax_rate):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_schedule_figure(trace: ScheduleTrace, path: str) -> None:
    """Gantt-style view of the simulated pipeline schedule."""
    stages = sorted({event.stage for event in trace.events})
    fig, ax = plt.subplots(figsize=(10, 0.6 * len(stages) + 1.5))
    colors = {"F": "tab:blue", "B": "tab:orange"}
    for event in trace.events:
        ax.barh(event.stage, event.end - event.start, left=event.start,
                height=0.6, color=colors[event.kind], edgecolor="white",
                linewidth=0.4)
        ax.text(event.start + (event.end - event.start) / 2, event.stage,
                f"{event.kind}{event.micro_id}", ha="center", va="center",
                fontsize=7, color="white")
    ax.set_yticks(stages)
    ax.set_yticklabels([f"stage {s}" for s in stages])
    ax.invert_yaxis()
    ax.set_xlabel("time (s)")
    ax.set_xlim(0, trace.makespan)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_plan_figure(ranked: RankedPlan, path: str) -> None:
    """Stacked per-term step time for the ranked strategies."""
    labels = [entry.strategy.label() for entry in ranked.entries]
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(labels) + 1.5))
    base = [0.0] * len(labels)
    for field_name, label in _STACK_FIELDS:
        values = [getattr(e.breakdown, field_name) for e in ranked.entries]
        if field_name == "tp_comm":  # the hidden share never shows on the wire
            values = [max(0.0, v - e.breakdown.overlap)
                      for v, e in zip(values, ranked.entries)]
        ax.barh(labels, values, left=base, label=label)
        base = [b + v for b, v in zip(base, values)]
    ax.invert_yaxis()
    ax.set_xlabel("step time (s)")
    ax.legend(fontsize=7, ncol=4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
