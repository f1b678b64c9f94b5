import json
import math
import random

import pytest

from paraplan import (DuplicateKey, EmptyTable, InvalidSample,
                      MalformedDocument, load_calibration, rho, slowdown_q)
from paraplan.calibration import (RhoSample, parse_samples,
                                  serialize_table, synthetic_rho_csv)

from conftest import Q_CSV


def test_single_row_ingested():
    table = load_calibration("b,s,h,t,rho\n4,4096,4096,4,1.8\n", Q_CSV)
    assert table.rho_samples == (RhoSample(4, 4096, 4096, 4, 1.8),)


def test_rho_below_one_rejected():
    with pytest.raises(InvalidSample):
        load_calibration("b,s,h,t,rho\n4,4096,4096,4,0.9\n", Q_CSV)


def test_q_outside_unit_interval_rejected():
    with pytest.raises(InvalidSample):
        load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n", "members,q\n2,1.2\n")
    with pytest.raises(InvalidSample):
        load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n", "members,q\n2,0.0\n")


def test_synthetic_curve_yields_six_samples():
    table = load_calibration(synthetic_rho_csv(2.0), Q_CSV)
    assert len(table.rho_samples) == 6
    for sample in table.rho_samples:
        assert sample.value == 1.0 + 2.0 / sample.micro_batch


def test_duplicate_keys_rejected():
    doc = "b,s,h,t,rho\n2,4,4,1,1.5\n2,4,4,1,1.6\n"
    with pytest.raises(DuplicateKey):
        load_calibration(doc, Q_CSV)
    with pytest.raises(DuplicateKey):
        load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n",
                         "members,q\n2,0.9\n2,0.8\n")


def test_empty_sides_rejected():
    with pytest.raises(EmptyTable):
        load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n")
    with pytest.raises(EmptyTable):
        load_calibration(Q_CSV)
    with pytest.raises(EmptyTable):
        load_calibration()


def test_unknown_header_rejected():
    with pytest.raises(MalformedDocument):
        load_calibration("batch,rho\n1,1.5\n", Q_CSV)


def test_exact_hit_returns_stored_value():
    table = load_calibration("b,s,h,t,rho\n4,4096,4096,4,1.8\n", Q_CSV)
    assert rho(table, 4, 4096, 4096, 4) == 1.8


def test_log_linear_midpoint():
    doc = "b,s,h,t,rho\n2,64,64,1,2.0\n8,64,64,1,1.25\n"
    table = load_calibration(doc, Q_CSV)
    # ln 4 is the midpoint of ln 2 and ln 8: geometric mean sqrt(2.0 * 1.25)
    assert rho(table, 4, 64, 64, 1) == pytest.approx(math.sqrt(2.5), rel=1e-12)


def test_clamped_beyond_sampled_range():
    table = load_calibration(synthetic_rho_csv(2.0), Q_CSV)
    assert rho(table, 64, 4096, 4096, 1) == rho(table, 32, 4096, 4096, 1)
    assert rho(table, 1, 4096, 4096, 1) == 3.0


def test_nearest_shape_key_selected():
    doc = ("b,s,h,t,rho\n"
           "2,1024,512,2,1.6\n"
           "2,4096,4096,8,1.2\n")
    table = load_calibration(doc, Q_CSV)
    assert rho(table, 2, 1000, 500, 2) == 1.6
    assert rho(table, 2, 4096, 4096, 8) == 1.2


def test_nearest_mode_interpolation():
    doc = "b,s,h,t,rho\n2,64,64,1,2.0\n8,64,64,1,1.25\n"
    table = load_calibration(doc, Q_CSV, interpolation_mode="nearest")
    assert rho(table, 3, 64, 64, 1) == 2.0   # ln 3 closer to ln 2
    assert rho(table, 6, 64, 64, 1) == 1.25  # ln 6 closer to ln 8


def test_slowdown_single_member_is_always_one():
    table = load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n", "members,q\n2,0.6\n")
    assert slowdown_q(table, 1) == 1.0


def test_slowdown_linear_interpolation_and_clamp():
    table = load_calibration("b,s,h,t,rho\n1,4,4,1,1.5\n",
                             "members,q\n2,0.95\n8,0.80\n")
    assert slowdown_q(table, 5) == pytest.approx(0.875, rel=1e-12)
    assert slowdown_q(table, 16) == 0.80
    assert slowdown_q(table, 2) == 0.95


def test_interpolation_preserves_monotonicity():
    rng = random.Random(7)
    for _ in range(50):
        bs = sorted(rng.sample(range(1, 200), 5))
        values = sorted(rng.uniform(1.0, 4.0) for _ in range(5))[::-1]
        rows = "\n".join(f"{b},16,16,1,{v!r}" for b, v in zip(bs, values))
        table = load_calibration("b,s,h,t,rho\n" + rows + "\n", Q_CSV)
        queries = [rho(table, b, 16, 16, 1) for b in range(1, 210)]
        assert all(a >= b_ for a, b_ in zip(queries, queries[1:]))


def test_lookups_total_after_load():
    table = load_calibration(synthetic_rho_csv(2.0), Q_CSV)
    rng = random.Random(3)
    for _ in range(200):
        value = rho(table, rng.randint(1, 500), rng.randint(1, 10000),
                    rng.randint(1, 10000), rng.randint(1, 64))
        assert value >= 1.0
        q = slowdown_q(table, rng.randint(1, 128))
        assert 0.0 < q <= 1.0


def test_bundle_round_trip():
    table = load_calibration(synthetic_rho_csv(2.0), Q_CSV)
    again = load_calibration(json.dumps(serialize_table(table)))
    assert set(again.rho_samples) == set(table.rho_samples)
    assert set(again.q_samples) == set(table.q_samples)
    assert again.interpolation_mode == table.interpolation_mode


def test_partial_parse_for_normalization():
    rho_samples, q_samples, mode = parse_samples(synthetic_rho_csv(1.0))
    assert len(rho_samples) == 6 and not q_samples and mode is None
