"""Hardware, model, and strategy descriptions plus parsing and validation.

Configuration documents are JSON objects whose keys match the dataclass
field names exactly. Unknown keys are rejected so typos surface early.
Units are fixed at this boundary: bandwidths in bytes/second, compute in
FLOPs/second, memory in bytes. All internal arithmetic is double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Any

from .errors import InvalidValue, MalformedDocument, MissingField

DEFAULT_NPUS_PER_SERVER = 8


@dataclass(frozen=True)
class HardwareConfig:
    """Static facts about the training cluster."""

    npu_count: int
    peak_flops: float              # per NPU, FLOPs/s
    inter_server_bandwidth: float  # bytes/s
    intra_server_bandwidth: float  # bytes/s
    memory_per_npu: float          # bytes
    npus_per_server: int = DEFAULT_NPUS_PER_SERVER
    allreduce_compute_ratio_tp: float = 0.0
    allreduce_compute_ratio_dp: float = 0.0

    def __post_init__(self):
        _require_int("npu_count", self.npu_count, minimum=1)
        _require_int("npus_per_server", self.npus_per_server, minimum=1)
        for name in ("peak_flops", "inter_server_bandwidth",
                     "intra_server_bandwidth", "memory_per_npu"):
            _require_positive(name, getattr(self, name))
        for name in ("allreduce_compute_ratio_tp", "allreduce_compute_ratio_dp"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidValue(f"{name} must be in [0, 1], got {value}")
        if (self.npu_count > self.npus_per_server
                and self.npu_count % self.npus_per_server != 0):
            raise InvalidValue(
                f"npus_per_server={self.npus_per_server} must divide "
                f"npu_count={self.npu_count}")


@dataclass(frozen=True)
class ModelConfig:
    """Transformer shape and training-run volume."""

    seq_length: int
    hidden_size: int
    attention_heads: int
    ffn_hidden_size: int
    num_layers: int
    vocab_size: int
    bytes_per_param: float
    total_samples: int
    backward_ratio: float = 2.0  # backward FLOPs per forward FLOP

    def __post_init__(self):
        for name in ("seq_length", "hidden_size", "attention_heads",
                     "ffn_hidden_size", "num_layers", "vocab_size",
                     "total_samples"):
            _require_int(name, getattr(self, name), minimum=1)
        _require_positive("bytes_per_param", self.bytes_per_param)
        _require_positive("backward_ratio", self.backward_ratio)
        if self.hidden_size % self.attention_heads != 0:
            raise InvalidValue(
                f"hidden_size={self.hidden_size} must be divisible by "
                f"attention_heads={self.attention_heads}")

    @property
    def layer_weight_count(self) -> int:
        """Weight elements of one transformer layer (attention + MLP + norms)."""
        h, f = self.hidden_size, self.ffn_hidden_size
        return 4 * h * h + 2 * h * f + 9 * h + f

    @property
    def vocab_weight_count(self) -> int:
        """Weight elements of the vocabulary output projection."""
        return self.vocab_size * self.hidden_size


@dataclass(frozen=True)
class ParallelStrategy:
    """The decision vector: parallel degrees and batch splitting.

    Deliberately a plain record: structural violations are reported by
    validate_strategy rather than raised at construction, so infeasible
    candidates can be represented and inspected.
    """

    data_parallel: int
    tensor_parallel: int
    pipeline_parallel: int
    micro_batch_size: int
    micro_steps: int
    global_batch_size: int
    mini_batch_size: int | None = None  # recorded, consumed by no formula

    def label(self) -> str:
        return (f"(d={self.data_parallel}, t={self.tensor_parallel}, "
                f"p={self.pipeline_parallel}, b={self.micro_batch_size})")


@dataclass(frozen=True)
class ValidationReport:
    """Constraint violations found in a strategy; empty means feasible."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_strategy(strategy: ParallelStrategy, hardware: HardwareConfig,
                      model: ModelConfig) -> ValidationReport:
    """Check the structural constraints linking a strategy to its cluster.

    Memory feasibility is deliberately not checked here; see the memory
    module for that.
    """
    s = strategy
    problems: list[str] = []
    for name in ("data_parallel", "tensor_parallel", "pipeline_parallel",
                 "micro_batch_size", "micro_steps", "global_batch_size"):
        value = getattr(s, name)
        if not isinstance(value, int) or value < 1:
            problems.append(f"{name} must be a positive integer, got {value!r}")
    if problems:
        return ValidationReport(tuple(problems))

    d, t, p = s.data_parallel, s.tensor_parallel, s.pipeline_parallel
    b, m, g = s.micro_batch_size, s.micro_steps, s.global_batch_size
    n = hardware.npu_count
    if d * t * p != n:
        problems.append(f"d·t·p={d * t * p} ≠ n={n}")
    if b * m * d != g:
        problems.append(f"b·m·d={b * m * d} ≠ G={g}")
    if g % (b * d) != 0:
        problems.append(f"b·d={b * d} does not divide G={g}")
    if not 1 <= p <= model.num_layers:
        problems.append(f"p={p} outside [1, L={model.num_layers}]")
    if not 1 <= t <= hardware.npus_per_server:
        problems.append(
            f"t={t} outside [1, npus_per_server={hardware.npus_per_server}]")
    return ValidationReport(tuple(problems))


def derive_strategy(d: int, t: int, p: int, b: int,
                    global_batch_size: int) -> ParallelStrategy:
    """Build a full strategy from (d, t, p, b), deriving the micro steps.

    Raises InvalidValue when b·d does not divide the global batch.
    """
    for name, value in (("d", d), ("t", t), ("p", p), ("b", b),
                        ("global batch", global_batch_size)):
        if not isinstance(value, int) or value < 1:
            raise InvalidValue(f"{name} must be a positive integer, got {value!r}")
    if global_batch_size % (b * d) != 0:
        raise InvalidValue(
            f"b·d={b * d} does not divide G={global_batch_size}")
    return ParallelStrategy(
        data_parallel=d, tensor_parallel=t, pipeline_parallel=p,
        micro_batch_size=b, micro_steps=global_batch_size // (b * d),
        global_batch_size=global_batch_size)


# --- document parsing ------------------------------------------------------

_HARDWARE_DEFAULTS = {
    "npus_per_server": DEFAULT_NPUS_PER_SERVER,
    "allreduce_compute_ratio_tp": 0.0,
    "allreduce_compute_ratio_dp": 0.0,
}
_MODEL_DEFAULTS = {"backward_ratio": 2.0}

_INT_FIELDS = {
    "npu_count", "npus_per_server", "seq_length", "hidden_size",
    "attention_heads", "ffn_hidden_size", "num_layers", "vocab_size",
    "total_samples",
}


def _as_mapping(doc: str | dict[str, Any], what: str) -> dict[str, Any]:
    if isinstance(doc, dict):
        return dict(doc)
    try:
        parsed = json.loads(doc)
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"{what} document is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise MalformedDocument(f"{what} document must be a JSON object")
    return parsed


def _build(cls, doc: str | dict[str, Any], defaults: dict[str, Any], what: str):
    data = _as_mapping(doc, what)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise MalformedDocument(f"unknown {what} field(s): {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for field in fields(cls):
        if field.name in data:
            value = data[field.name]
        elif field.name in defaults:
            value = defaults[field.name]
        else:
            raise MissingField(f"{what} document is missing '{field.name}'")
        if field.name in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidValue(f"{field.name} must be an integer, got {value!r}")
            if isinstance(value, float):
                if not value.is_integer():
                    raise InvalidValue(f"{field.name} must be an integer, got {value!r}")
                value = int(value)
        kwargs[field.name] = value
    return cls(**kwargs)


def parse_hardware(doc: str | dict[str, Any]) -> HardwareConfig:
    """Parse and validate a hardware document (JSON text or mapping)."""
    return _build(HardwareConfig, doc, _HARDWARE_DEFAULTS, "hardware")


def parse_model(doc: str | dict[str, Any]) -> ModelConfig:
    """Parse and validate a model document (JSON text or mapping)."""
    return _build(ModelConfig, doc, _MODEL_DEFAULTS, "model")


def parse_configs(hardware_doc: str | dict[str, Any],
                  model_doc: str | dict[str, Any]) -> tuple[HardwareConfig, ModelConfig]:
    """Parse the hardware and model documents together."""
    return parse_hardware(hardware_doc), parse_model(model_doc)


def serialize_hardware(hw: HardwareConfig) -> dict[str, Any]:
    return {f.name: getattr(hw, f.name) for f in fields(HardwareConfig)}


def serialize_model(model: ModelConfig) -> dict[str, Any]:
    return {f.name: getattr(model, f.name) for f in fields(ModelConfig)}


def _require_positive(name: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidValue(f"{name} must be a positive number, got {value!r}")
    if not value > 0:
        raise InvalidValue(f"{name} must be > 0, got {value}")


def _require_int(name: str, value, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidValue(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidValue(f"{name} must be ≥ {minimum}, got {value}")
