"""Analytical planner for 3D-parallel (DP/TP/PP) transformer training.

Estimates per-step training time from hardware, model, and profiled
calibration data, searches the pruned strategy space for the
throughput-optimal (d, t, p, b) configuration, and validates its bubble
model against a built-in discrete-event 1F1B simulator.
"""

from .calibration import CalibrationTable, load_calibration, rho, slowdown_q
from .config import (HardwareConfig, ModelConfig, ParallelStrategy,
                     ValidationReport, derive_strategy, parse_configs,
                     parse_hardware, parse_model, validate_strategy)
from .costmodel import (CoefficientSet, TimeBreakdown,
                        allreduce_compute_times, bubble_time,
                        coefficient_set, compute_time, db_sensitivity,
                        dp_comm_time, g_decomposition, overlap_time,
                        pp_comm_time, total_breakdown, tp_comm_time)
from .errors import (DuplicateKey, EmptyTable, IndivisibleMicroBatch,
                     IndivisibleValue, Infeasible, InvalidSample,
                     InvalidValue, MalformedDocument, MissingField,
                     NoFeasibleStrategy, PlannerError)
from .memory import (BoundSet, MemoryEstimate, b_max, feasibility_bounds,
                     is_oom, memory_estimate, per_npu_requirement)
from .pipeline import (ScheduleTrace, StageTiming, bubble_vs_closed_form,
                       closed_form_bubble, simulate_1f1b)
from .search import (PlanEntry, PlanRequest, RankedPlan, SweepPoint,
                     enumerate_candidates, plan, sweep)

__version__ = "0.1.0"

__all__ = [
    "CalibrationTable", "load_calibration", "rho", "slowdown_q",
    "HardwareConfig", "ModelConfig", "ParallelStrategy", "ValidationReport",
    "derive_strategy", "parse_configs", "parse_hardware", "parse_model",
    "validate_strategy",
    "CoefficientSet", "TimeBreakdown", "allreduce_compute_times",
    "bubble_time", "coefficient_set", "compute_time", "db_sensitivity",
    "dp_comm_time", "g_decomposition", "overlap_time", "pp_comm_time",
    "total_breakdown", "tp_comm_time",
    "BoundSet", "MemoryEstimate", "b_max", "feasibility_bounds", "is_oom",
    "memory_estimate", "per_npu_requirement",
    "ScheduleTrace", "StageTiming", "bubble_vs_closed_form",
    "closed_form_bubble", "simulate_1f1b",
    "PlanEntry", "PlanRequest", "RankedPlan", "SweepPoint",
    "enumerate_candidates", "plan", "sweep",
    "PlannerError", "MalformedDocument", "MissingField", "InvalidValue",
    "InvalidSample", "EmptyTable", "DuplicateKey", "Infeasible",
    "IndivisibleMicroBatch", "IndivisibleValue", "NoFeasibleStrategy",
]
