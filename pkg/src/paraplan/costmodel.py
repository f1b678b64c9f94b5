"""Per-step duration terms and the assembled training-time estimate.

Every function here is a pure function of immutable inputs. All terms are
per-optimizer-step durations in seconds; multiplying by the step count
(total samples over global batch) gives the full-run total. The modeled
device is the last pipeline stage,
which carries the vocabulary output layer and therefore bounds the step:
upstream stages would otherwise idle waiting for it.

Conventions baked in:

* the backward pass costs ``backward_ratio`` (k) times the forward pass,
  so compute and communication carry a (1+k) factor and the backward
  share of tensor-parallel traffic is k/(1+k);
* the pipeline bubble closed form multiplies the compute-plus-unhidden-
  TP-communication operand by (p-1)/m, the 1F1B ramp cost;
* tensor-parallel collectives ride the intra-server mesh and feel the
  profiled member-count slowdown; the data-parallel ring rides the
  inter-server links at full nominal bandwidth.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import calibration
from .calibration import CalibrationTable
from .config import HardwareConfig, ModelConfig, ParallelStrategy
from .errors import IndivisibleMicroBatch, InvalidValue


@dataclass(frozen=True)
class TimeBreakdown:
    """The per-step duration terms and run-level totals, in seconds."""

    compute: float            # forward+backward FLOP time
    tp_comm: float            # tensor-parallel all-reduce transfer
    tp_reduce_compute: float  # arithmetic inside TP all-reduce
    dp_comm: float            # gradient ring all-reduce transfer
    dp_reduce_compute: float  # arithmetic inside DP all-reduce
    pp_comm: float            # pipeline point-to-point transfer
    bubble: float             # pipeline idle time
    overlap: float            # TP communication hidden behind weight grads
    step_time: float
    total_time: float
    throughput: float         # samples per second


@dataclass(frozen=True)
class CoefficientSet:
    """Closed-form coefficients backing the duration terms.

    The first eight are the per-term constants (layer and vocabulary
    contributions of compute, DP sync, TP sync, and the two P2P parts);
    the last two are the global-batch decomposition: a per-sample cost
    that scaling G cannot touch and a per-step overhead that it amortizes.
    """

    compute_layers: float     # s/sample
    compute_vocab: float      # s/sample, per pipeline stage
    dp_sync_layers: float     # s
    dp_sync_vocab: float      # s
    tp_sync_layers: float     # s
    tp_sync_vocab: float      # s
    p2p_step: float           # s
    p2p_micro: float          # s
    per_sample_cost: float    # s/sample
    per_step_cost: float      # s


def _utilization_reciprocal(model: ModelConfig, calib: CalibrationTable,
                            strategy: ParallelStrategy) -> float:
    return calibration.rho(calib, strategy.micro_batch_size, model.seq_length,
                           model.hidden_size, strategy.tensor_parallel)


def compute_time(hardware: HardwareConfig, model: ModelConfig,
                 calib: CalibrationTable, strategy: ParallelStrategy) -> float:
    """FLOP time of the last pipeline stage over one step.

    Attention, feed-forward, and (scaled by the stage count, since every
    stage waits for it) the vocabulary projection, at profiled utilization.
    """
    layer_cost, vocab_cost = _compute_coefficients(hardware, model)
    rho = _utilization_reciprocal(model, calib, strategy)
    return ((layer_cost + vocab_cost * strategy.pipeline_parallel)
            * strategy.global_batch_size * rho)


def _compute_coefficients(hardware, model) -> tuple[float, float]:
    s, h, f = model.seq_length, model.hidden_size, model.ffn_hidden_size
    k = model.backward_ratio
    denom = hardware.npu_count * hardware.peak_flops
    layer_flops = 4 * s * h * h + 2 * s * s * h + 2 * s * h * f
    layer_cost = 2 * (1 + k) * model.num_layers * layer_flops / denom
    vocab_cost = 2 * (1 + k) * s * h * model.vocab_size / denom
    return layer_cost, vocab_cost


def tp_comm_time(hardware: HardwareConfig, model: ModelConfig,
                 calib: CalibrationTable, strategy: ParallelStrategy) -> float:
    """Tensor-parallel all-reduce transfer time; zero without TP."""
    if strategy.tensor_parallel == 1:
        return 0.0
    layer_sync, vocab_sync = _tp_coefficients(hardware, model, calib, strategy)
    return layer_sync + vocab_sync * strategy.pipeline_parallel


def _tp_coefficients(hardware, model, calib, strategy) -> tuple[float, float]:
    s, h, u = model.seq_length, model.hidden_size, model.bytes_per_param
    q = calibration.slowdown_q(calib, strategy.tensor_parallel)
    denom = q * hardware.intra_server_bandwidth * hardware.npu_count
    per_sample = s * h * u * strategy.global_batch_size
    return 8 * model.num_layers * per_sample / denom, per_sample / denom


def dp_comm_time(hardware: HardwareConfig, model: ModelConfig,
                 strategy: ParallelStrategy) -> float:
    """Gradient ring all-reduce transfer time; zero when d = 1."""
    layer_sync, vocab_sync = _dp_coefficients(hardware, model)
    p, t, n = (strategy.pipeline_parallel, strategy.tensor_parallel,
               hardware.npu_count)
    return (layer_sync * (1.0 / (p * t) - 1.0 / n)
            + vocab_sync * (1.0 / t - p / n))


def _dp_coefficients(hardware, model) -> tuple[float, float]:
    u, g = model.bytes_per_param, hardware.inter_server_bandwidth
    layer_sync = 2 * model.num_layers * model.layer_weight_count * u / g
    vocab_sync = 2 * model.vocab_weight_count * u / g
    return layer_sync, vocab_sync


def pp_comm_time(hardware: HardwareConfig, model: ModelConfig,
                 strategy: ParallelStrategy) -> float:
    """Point-to-point activation transfer time; zero without a pipeline."""
    p = strategy.pipeline_parallel
    if p == 1:
        return 0.0
    batch_part, micro_part = _pp_coefficients(hardware, model, strategy)
    b = strategy.micro_batch_size
    return (batch_part * p * strategy.tensor_parallel
            + 2 * micro_part * p * b - 3 * micro_part * b)


def _pp_coefficients(hardware, model, strategy) -> tuple[float, float]:
    s, h, u = model.seq_length, model.hidden_size, model.bytes_per_param
    batch_part = s * h * u * strategy.global_batch_size / (
        hardware.inter_server_bandwidth * hardware.npu_count)
    micro_part = s * h * u / hardware.inter_server_bandwidth
    return batch_part, micro_part


def allreduce_compute_times(hardware: HardwareConfig, tp_comm: float,
                            dp_comm: float) -> tuple[float, float]:
    """Arithmetic cost of the all-reduce ops, as calibrated comm fractions."""
    return (hardware.allreduce_compute_ratio_tp * tp_comm,
            hardware.allreduce_compute_ratio_dp * dp_comm)


def overlap_time(hardware: HardwareConfig, model: ModelConfig,
                 calib: CalibrationTable, strategy: ParallelStrategy,
                 backward_fraction: float | None = None) -> float:
    """TP communication hidden behind backward weight-gradient compute.

    Per layer and per sublayer (attention, MLP), the hideable time is the
    smaller of that sublayer's backward all-reduce share and its weight-
    gradient compute time. ``backward_fraction`` overrides the k/(1+k)
    split of communication between forward and backward.
    """
    if strategy.tensor_parallel == 1:
        return 0.0
    k = model.backward_ratio
    if backward_fraction is None:
        backward_fraction = k / (1.0 + k)
    total_comm = tp_comm_time(hardware, model, calib, strategy)
    sublayer_comm = backward_fraction * total_comm / (2 * model.num_layers)

    s, h, f, u = (model.seq_length, model.hidden_size, model.ffn_hidden_size,
                  model.bytes_per_param)
    rho = _utilization_reciprocal(model, calib, strategy)
    scale = strategy.global_batch_size * rho / (
        hardware.npu_count * hardware.peak_flops)
    weight_grad_attention = 3 * u * s * h * h * scale  # per layer
    weight_grad_mlp = u * s * h * f * scale            # per layer

    hidden = model.num_layers * (min(sublayer_comm, weight_grad_attention)
                                 + min(sublayer_comm, weight_grad_mlp))
    # structural per-sublayer min already keeps this under total_comm
    tp_reduce = hardware.allreduce_compute_ratio_tp * total_comm
    return min(hidden, total_comm + tp_reduce)


def bubble_time(compute: float, tp_comm: float, tp_reduce_compute: float,
                overlap: float, pipeline_parallel: int, micro_steps: int) -> float:
    """1F1B ramp cost: the unhidden per-step operand scaled by (p-1)/m."""
    if pipeline_parallel == 1:
        return 0.0
    operand = compute + tp_comm + tp_reduce_compute - overlap
    return operand * (pipeline_parallel - 1) / micro_steps


def total_breakdown(hardware: HardwareConfig, model: ModelConfig,
                    calib: CalibrationTable, strategy: ParallelStrategy,
                    samples: int | None = None) -> TimeBreakdown:
    """Assemble every duration term for one strategy.

    ``samples`` overrides the model's total sample count. Memory
    feasibility is not checked here.
    """
    run_samples = model.total_samples if samples is None else samples
    compute = compute_time(hardware, model, calib, strategy)
    tp_comm = tp_comm_time(hardware, model, calib, strategy)
    dp_comm = dp_comm_time(hardware, model, strategy)
    pp_comm = pp_comm_time(hardware, model, strategy)
    overlap = overlap_time(hardware, model, calib, strategy)
    tp_reduce, dp_reduce = allreduce_compute_times(hardware, tp_comm, dp_comm)
    bubble = bubble_time(compute, tp_comm, tp_reduce, overlap,
                         strategy.pipeline_parallel, strategy.micro_steps)
    step = (compute + tp_comm + tp_reduce - overlap + dp_comm + dp_reduce
            + bubble + pp_comm)
    g = strategy.global_batch_size
    total = step * run_samples / g if g else 0.0
    throughput = run_samples / total if total else 0.0
    return TimeBreakdown(
        compute=compute, tp_comm=tp_comm, tp_reduce_compute=tp_reduce,
        dp_comm=dp_comm, dp_reduce_compute=dp_reduce, pp_comm=pp_comm,
        bubble=bubble, overlap=overlap, step_time=step, total_time=total,
        throughput=throughput)


def g_decomposition(hardware: HardwareConfig, model: ModelConfig,
                    calib: CalibrationTable,
                    strategy: ParallelStrategy) -> tuple[float, float]:
    """Split the total into (per-sample cost, per-step overhead).

    total = (per_sample + per_step / G) * samples. Compute, TP traffic,
    and the G-proportional P2P part scale with the global batch and land
    in the per-sample cost; DP sync, the micro-batch P2P parts, and the
    bubble (whose G factors cancel against the micro-step count) form the
    per-step overhead that a larger G amortizes.
    """
    compute = compute_time(hardware, model, calib, strategy)
    tp_comm = tp_comm_time(hardware, model, calib, strategy)
    dp_comm = dp_comm_time(hardware, model, strategy)
    overlap = overlap_time(hardware, model, calib, strategy)
    tp_reduce, dp_reduce = allreduce_compute_times(hardware, tp_comm, dp_comm)
    bubble = bubble_time(compute, tp_comm, tp_reduce, overlap,
                         strategy.pipeline_parallel, strategy.micro_steps)
    p, t, b = (strategy.pipeline_parallel, strategy.tensor_parallel,
               strategy.micro_batch_size)
    batch_part, micro_part = _pp_coefficients(hardware, model, strategy)
    p2p_scaling = batch_part * p * t if p > 1 else 0.0
    p2p_fixed = (2 * micro_part * p * b - 3 * micro_part * b) if p > 1 else 0.0
    g = strategy.global_batch_size
    per_sample = (compute + tp_comm + tp_reduce - overlap + p2p_scaling) / g
    per_step = dp_comm + dp_reduce + bubble + p2p_fixed
    return per_sample, per_step


def coefficient_set(hardware: HardwareConfig, model: ModelConfig,
                    calib: CalibrationTable,
                    strategy: ParallelStrategy) -> CoefficientSet:
    """All closed-form coefficients for introspection and reporting."""
    compute_layers, compute_vocab = _compute_coefficients(hardware, model)
    dp_layers, dp_vocab = _dp_coefficients(hardware, model)
    tp_layers, tp_vocab = _tp_coefficients(hardware, model, calib, strategy)
    p2p_step, p2p_micro = _pp_coefficients(hardware, model, strategy)
    per_sample, per_step = g_decomposition(hardware, model, calib, strategy)
    return CoefficientSet(
        compute_layers=compute_layers, compute_vocab=compute_vocab,
        dp_sync_layers=dp_layers, dp_sync_vocab=dp_vocab,
        tp_sync_layers=tp_layers, tp_sync_vocab=tp_vocab,
        p2p_step=p2p_step, p2p_micro=p2p_micro,
        per_sample_cost=per_sample, per_step_cost=per_step)


def db_sensitivity(hardware: HardwareConfig, model: ModelConfig,
                   calib: CalibrationTable, strategy: ParallelStrategy,
                   delta_b: int) -> float:
    """Finite-difference sensitivity of the total time to the micro batch.

    Both b and b+delta_b must keep the micro-step count integral for the
    strategy's fixed G and d.
    """
    if not isinstance(delta_b, int) or delta_b < 1:
        raise InvalidValue(f"delta_b must be a positive integer, got {delta_b!r}")
    d, g = strategy.data_parallel, strategy.global_batch_size
    totals = []
    for b in (strategy.micro_batch_size, strategy.micro_batch_size + delta_b):
        if g % (b * d) != 0:
            raise IndivisibleMicroBatch(
                f"micro batch {b} with d={d} does not divide G={g}")
        candidate = replace(strategy, micro_batch_size=b, micro_steps=g // (b * d))
        totals.append(total_breakdown(hardware, model, calib, candidate).total_time)
    return (totals[1] - totals[0]) / delta_b
