"""Closed-form memory accounting and the derived search-space bounds.

Weights, optimizer state (9× weights for the mixed-precision optimizer
layout), and activations at the 1F1B peak (b·p micro batches in flight)
are evaluated exactly. The per-NPU requirement is not simply total/(p·t):
each layer's input activations are not tensor-parallelized and every
pipeline stage holds a full complement of them, so they form a floor that
no parallelism shards. Splitting the requirement into

    requirement(b, p, t) = unsharded(b) + tp_sharded(b)/t + state/(p·t)

is what makes the t and p lower bounds below an exact rearrangement of
``requirement ≤ capacity``, which the bound-soundness tests exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import HardwareConfig, ModelConfig, ParallelStrategy
from .errors import Infeasible

B_MAX_CEILING = 1024  # terminates the power-of-two scan under absurd memory

OPTIMIZER_STATE_RATIO = 9  # optimizer bytes per weight byte


@dataclass(frozen=True)
class MemoryEstimate:
    """Training-time memory footprint of one strategy, in bytes."""

    weights: float
    optimizer: float
    activations: float
    total: float
    per_npu: float


@dataclass(frozen=True)
class BoundSet:
    """Feasibility bounds at a fixed micro batch size.

    ``t_min`` is None when no tensor degree can hold this micro batch.
    """

    m1: float  # capacity left after the unsharded activation floor
    m2: float  # bytes shardable only by tensor parallelism
    m3: float  # weight+optimizer bytes shardable by both p and t
    micro_batch: int
    t_min: int | None

    def p_min(self, tensor_parallel: int) -> int | None:
        """Smallest pipeline degree feasible at the given t, or None."""
        if self.t_min is None:
            return None
        room = self.m1 * tensor_parallel - self.m2
        if room <= 0:
            return None
        return max(1, math.ceil(self.m3 / room))


def _unsharded_activation(model: ModelConfig, micro_batch: int) -> float:
    h, f = model.hidden_size, model.ffn_hidden_size
    return 2.0 * model.num_layers * model.seq_length * micro_batch * (h + f)


def _tp_sharded_bytes(model: ModelConfig, micro_batch: int) -> float:
    h, f = model.hidden_size, model.ffn_hidden_size
    s, a = model.seq_length, model.attention_heads
    act = model.num_layers * s * micro_batch * (16 * h + 2 * f + 5 * s * a)
    return float(act) + model.vocab_weight_count * model.bytes_per_param


def _state_bytes(model: ModelConfig) -> float:
    return ((1 + OPTIMIZER_STATE_RATIO) * model.bytes_per_param
            * model.num_layers * model.layer_weight_count)


def per_npu_requirement(model: ModelConfig, micro_batch: int,
                        pipeline_parallel: int, tensor_parallel: int) -> float:
    """Bytes one NPU must provide for the given placement."""
    return (_unsharded_activation(model, micro_batch)
            + _tp_sharded_bytes(model, micro_batch) / tensor_parallel
            + _state_bytes(model) / (pipeline_parallel * tensor_parallel))


def memory_estimate(model: ModelConfig, strategy: ParallelStrategy) -> MemoryEstimate:
    """Exact closed-form footprint for one strategy."""
    h, f = model.hidden_size, model.ffn_hidden_size
    s, a = model.seq_length, model.attention_heads
    b, p, t = (strategy.micro_batch_size, strategy.pipeline_parallel,
               strategy.tensor_parallel)
    weights = (model.num_layers * model.layer_weight_count
               + model.vocab_weight_count) * model.bytes_per_param
    optimizer = OPTIMIZER_STATE_RATIO * weights
    activations = float(model.num_layers * s * b * p * (18 * h + 4 * f + 5 * s * a))
    return MemoryEstimate(
        weights=weights,
        optimizer=optimizer,
        activations=activations,
        total=weights + optimizer + activations,
        per_npu=per_npu_requirement(model, b, p, t),
    )


def is_oom(hardware: HardwareConfig, model: ModelConfig,
           strategy: ParallelStrategy, headroom: float = 0.0) -> bool:
    """True iff the strategy's per-NPU requirement exceeds capacity.

    A requirement exactly equal to capacity fits. ``headroom`` reserves a
    fraction of capacity for allocator slack; the default matches the
    closed forms exactly.
    """
    capacity = hardware.memory_per_npu * (1.0 - headroom)
    b, p, t = (strategy.micro_batch_size, strategy.pipeline_parallel,
               strategy.tensor_parallel)
    return per_npu_requirement(model, b, p, t) > capacity


def feasibility_bounds(hardware: HardwareConfig, model: ModelConfig,
                       micro_batch: int, headroom: float = 0.0) -> BoundSet:
    """Lower bounds on t and p for the given micro batch.

    Raises Infeasible when the unsharded activation floor alone exceeds
    capacity at micro batch 1: the model cannot fit at any parallelism.
    """
    capacity = hardware.memory_per_npu * (1.0 - headroom)
    m1 = capacity - _unsharded_activation(model, micro_batch)
    m2 = _tp_sharded_bytes(model, micro_batch)
    m3 = _state_bytes(model)
    if m1 <= 0:
        if micro_batch <= 1:
            raise Infeasible(
                "unsharded activations exceed per-NPU memory at micro batch 1; "
                "the model cannot fit at any parallelism")
        return BoundSet(m1, m2, m3, micro_batch, t_min=None)
    t_min = max(1, math.ceil(m2 / m1))
    return BoundSet(m1, m2, m3, micro_batch, t_min=t_min)


def b_max(hardware: HardwareConfig, model: ModelConfig, pipeline_parallel: int,
          tensor_parallel: int, ceiling: int = B_MAX_CEILING,
          headroom: float = 0.0) -> int:
    """Largest power-of-two micro batch that fits at (p, t); 0 if none.

    The requirement is affine increasing in b, so the scan stops at the
    first overflow.
    """
    capacity = hardware.memory_per_npu * (1.0 - headroom)
    best = 0
    b = 1
    while b <= ceiling:
        need = per_npu_requirement(model, b, pipeline_parallel, tensor_parallel)
        if need > capacity:
            break
        best = b
        b *= 2
    return best
