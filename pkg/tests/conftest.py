"""Shared fixtures: toy configurations sized for hand verification."""

from pathlib import Path

import pytest

from paraplan import (CalibrationTable, HardwareConfig, ModelConfig,
                      load_calibration, parse_configs)
from paraplan.calibration import QSample, RhoSample, synthetic_rho_csv

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

Q_CSV = "members,q\n2,0.95\n4,0.9\n8,0.8\n"


def make_hardware(npu_count=8, peak_flops=1e12, inter=1e9, intra=1e9,
                  memory=1e18, per_server=8, tp_ratio=0.0, dp_ratio=0.0):
    return HardwareConfig(
        npu_count=npu_count, peak_flops=peak_flops,
        inter_server_bandwidth=inter, intra_server_bandwidth=intra,
        memory_per_npu=memory, npus_per_server=per_server,
        allreduce_compute_ratio_tp=tp_ratio, allreduce_compute_ratio_dp=dp_ratio)


def flat_calibration(value=2.0) -> CalibrationTable:
    """Constant utilization reciprocal; slowdowns 0.8 at 2+ members."""
    return CalibrationTable(
        rho_samples=(RhoSample(1, 4, 4, 1, value),),
        q_samples=(QSample(2, 0.8), QSample(8, 0.8)))


def synthetic_calibration(coefficient=2.0) -> CalibrationTable:
    """The standing 1 + c/b utilization curve plus mild slowdowns."""
    return load_calibration(synthetic_rho_csv(coefficient), Q_CSV)


@pytest.fixture
def tiny_model() -> ModelConfig:
    """Small enough that every closed form is checkable by hand."""
    return ModelConfig(seq_length=4, hidden_size=4, attention_heads=2,
                       ffn_hidden_size=8, num_layers=2, vocab_size=16,
                       bytes_per_param=2, total_samples=64)


@pytest.fixture
def search_model() -> ModelConfig:
    """Slightly larger shape used by the search-space fixtures."""
    return ModelConfig(seq_length=8, hidden_size=8, attention_heads=2,
                       ffn_hidden_size=16, num_layers=4, vocab_size=32,
                       bytes_per_param=2, total_samples=64)


@pytest.fixture
def reference_configs():
    """The shipped 16-NPU fixture: hardware, model, calibration."""
    hw, model = parse_configs(
        (CONFIG_DIR / "hardware_16npu.json").read_text(),
        (CONFIG_DIR / "model_7b.json").read_text())
    calib = load_calibration((CONFIG_DIR / "calibration_16npu.json").read_text())
    return hw, model, calib
