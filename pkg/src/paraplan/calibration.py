"""Profiled dynamic quantities: compute-utilization reciprocal and bandwidth slowdown.

Two sample families are ingested from profiling output and answered at
query time by interpolation:

* utilization reciprocal, a function of (micro batch, sequence length,
  hidden size, tensor degree), always ≥ 1;
* bandwidth slowdown for intra-server collectives as a function of the
  member count, always in (0, 1].

Accepted file forms: a delimited table with header ``b,s,h,t,rho``, a
delimited table with header ``members,q``, or a JSON bundle
``{"rho": [...], "q": [...]}`` carrying records with the same keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .errors import DuplicateKey, EmptyTable, InvalidSample, MalformedDocument

RHO_HEADER = ("b", "s", "h", "t", "rho")
Q_HEADER = ("members", "q")

INTERPOLATION_MODES = ("nearest", "log_linear_b")


@dataclass(frozen=True)
class RhoSample:
    micro_batch: int
    seq_length: int
    hidden_size: int
    tensor_parallel: int
    value: float  # reciprocal of utilization, ≥ 1

    @property
    def shape_key(self) -> tuple[int, int, int]:
        return (self.seq_length, self.hidden_size, self.tensor_parallel)


@dataclass(frozen=True)
class QSample:
    members: int
    value: float  # bandwidth slowdown, in (0, 1]


@dataclass(frozen=True)
class CalibrationTable:
    rho_samples: tuple[RhoSample, ...]
    q_samples: tuple[QSample, ...]
    interpolation_mode: str = "log_linear_b"

    def __post_init__(self):
        if self.interpolation_mode not in INTERPOLATION_MODES:
            raise MalformedDocument(
                f"interpolation_mode must be one of {INTERPOLATION_MODES}, "
                f"got {self.interpolation_mode!r}")
        if not self.rho_samples:
            raise EmptyTable("calibration has no utilization samples")
        if not self.q_samples:
            raise EmptyTable("calibration has no slowdown samples")
        check_rho_samples(self.rho_samples)
        check_q_samples(self.q_samples)


def check_rho_samples(samples) -> None:
    """Reject out-of-range values and duplicate keys."""
    seen = set()
    for rec in samples:
        if rec.value < 1.0:
            raise InvalidSample(
                f"utilization reciprocal must be ≥ 1, got {rec.value} at "
                f"b={rec.micro_batch} s={rec.seq_length} h={rec.hidden_size} "
                f"t={rec.tensor_parallel}")
        key = (rec.micro_batch,) + rec.shape_key
        if key in seen:
            raise DuplicateKey(f"duplicate utilization sample for {key}")
        seen.add(key)
        for name in ("micro_batch", "seq_length", "hidden_size", "tensor_parallel"):
            if getattr(rec, name) < 1:
                raise InvalidSample(f"{name} must be ≥ 1 in utilization samples")


def check_q_samples(samples) -> None:
    """Reject out-of-range values and duplicate member counts."""
    seen = set()
    for rec in samples:
        if not 0.0 < rec.value <= 1.0:
            raise InvalidSample(
                f"slowdown must be in (0, 1], got {rec.value} at members={rec.members}")
        if rec.members < 1:
            raise InvalidSample("member count must be ≥ 1 in slowdown samples")
        if rec.members in seen:
            raise DuplicateKey(f"duplicate slowdown sample for members={rec.members}")
        seen.add(rec.members)


# --- loading ----------------------------------------------------------------

def load_calibration(*docs: str, interpolation_mode: str = "log_linear_b") -> CalibrationTable:
    """Build a calibration table from one or more documents.

    Each document may be a JSON bundle or either delimited table; samples
    from all documents are merged. The result must contain at least one
    sample of each kind.
    """
    if not docs:
        raise EmptyTable("no calibration documents given")
    rho: list[RhoSample] = []
    q: list[QSample] = []
    mode = interpolation_mode
    for doc in docs:
        got_rho, got_q, doc_mode = parse_samples(doc)
        rho.extend(got_rho)
        q.extend(got_q)
        if doc_mode is not None:
            mode = doc_mode
    return CalibrationTable(tuple(rho), tuple(q), interpolation_mode=mode)


def parse_samples(doc: str) -> tuple[list[RhoSample], list[QSample], str | None]:
    """Parse one document into sample lists without completeness checks.

    Returns (rho_samples, q_samples, interpolation_mode or None). Used by
    load_calibration and by the CLI's calibrate command, which normalizes
    possibly partial files.
    """
    stripped = doc.lstrip()
    if not stripped:
        raise MalformedDocument("calibration document is empty")
    if stripped.startswith("{"):
        return _parse_bundle(doc)
    return _parse_delimited(doc)


def _parse_bundle(text: str) -> tuple[list[RhoSample], list[QSample], str | None]:
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise MalformedDocument(f"calibration bundle is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedDocument("calibration bundle must be a JSON object")
    unknown = sorted(set(data) - {"rho", "q", "interpolation_mode"})
    if unknown:
        raise MalformedDocument(f"unknown calibration key(s): {', '.join(unknown)}")
    rho = [_rho_record(rec) for rec in data.get("rho", [])]
    q = [_q_record(rec) for rec in data.get("q", [])]
    mode = data.get("interpolation_mode")
    if mode is not None and mode not in INTERPOLATION_MODES:
        raise MalformedDocument(f"unknown interpolation_mode {mode!r}")
    return rho, q, mode


def _parse_delimited(text: str) -> tuple[list[RhoSample], list[QSample], str | None]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise MalformedDocument("calibration table has no header row")
    header = tuple(cell.strip() for cell in rows[0])
    if header == RHO_HEADER:
        records = [_rho_record(dict(zip(header, row))) for row in _cells(rows[1:], 5)]
        return records, [], None
    if header == Q_HEADER:
        records = [_q_record(dict(zip(header, row))) for row in _cells(rows[1:], 2)]
        return [], records, None
    raise MalformedDocument(
        f"unrecognized calibration header {','.join(header)!r}; expected "
        f"{','.join(RHO_HEADER)!r} or {','.join(Q_HEADER)!r}")


def _cells(rows, width):
    for row in rows:
        if len(row) != width:
            raise MalformedDocument(f"calibration row has {len(row)} fields, expected {width}")
        yield [cell.strip() for cell in row]


def _rho_record(rec) -> RhoSample:
    if not isinstance(rec, dict):
        raise MalformedDocument("utilization record must be a mapping")
    unknown = sorted(set(rec) - set(RHO_HEADER))
    if unknown:
        raise MalformedDocument(f"unknown utilization field(s): {', '.join(unknown)}")
    try:
        return RhoSample(
            micro_batch=_to_int(rec["b"]),
            seq_length=_to_int(rec["s"]),
            hidden_size=_to_int(rec["h"]),
            tensor_parallel=_to_int(rec["t"]),
            value=float(rec["rho"]),
        )
    except KeyError as exc:
        raise MalformedDocument(f"utilization record missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad utilization record {rec!r}: {exc}") from exc


def _q_record(rec) -> QSample:
    if not isinstance(rec, dict):
        raise MalformedDocument("slowdown record must be a mapping")
    unknown = sorted(set(rec) - set(Q_HEADER))
    if unknown:
        raise MalformedDocument(f"unknown slowdown field(s): {', '.join(unknown)}")
    try:
        return QSample(members=_to_int(rec["members"]), value=float(rec["q"]))
    except KeyError as exc:
        raise MalformedDocument(f"slowdown record missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad slowdown record {rec!r}: {exc}") from exc


def _to_int(value) -> int:
    as_float = float(value)
    if not as_float.is_integer():
        raise ValueError(f"{value!r} is not an integer")
    return int(as_float)


def serialize_table(table: CalibrationTable) -> dict:
    """Canonical JSON-ready form: both sample lists, sorted by key."""
    return {
        "interpolation_mode": table.interpolation_mode,
        "rho": [
            {"b": r.micro_batch, "s": r.seq_length, "h": r.hidden_size,
             "t": r.tensor_parallel, "rho": r.value}
            for r in sorted(table.rho_samples,
                            key=lambda r: (r.shape_key, r.micro_batch))
        ],
        "q": [
            {"members": r.members, "q": r.value}
            for r in sorted(table.q_samples, key=lambda r: r.members)
        ],
    }


# --- queries ----------------------------------------------------------------

def rho(table: CalibrationTable, micro_batch: int, seq_length: int,
        hidden_size: int, tensor_parallel: int) -> float:
    """Utilization reciprocal at the query point; total and deterministic.

    Exact sample values are returned unchanged. Otherwise the nearest
    profiled (s, h, t) shape is selected and the value is interpolated
    along the micro batch (log-linear by default, since the search walks
    b in powers of two), clamping outside the sampled range.
    """
    query_shape = (seq_length, hidden_size, tensor_parallel)
    group = _nearest_shape_group(table, query_shape)
    points = sorted((r.micro_batch, r.value) for r in group)
    return _along_b(points, micro_batch, table.interpolation_mode)


def _nearest_shape_group(table: CalibrationTable, query_shape) -> list[RhoSample]:
    by_shape: dict[tuple[int, int, int], list[RhoSample]] = {}
    for rec in table.rho_samples:
        by_shape.setdefault(rec.shape_key, []).append(rec)
    if query_shape in by_shape:
        return by_shape[query_shape]

    def distance(shape):
        return sum(abs(math.log(a / b)) for a, b in zip(shape, query_shape))

    best = min(sorted(by_shape), key=distance)
    return by_shape[best]


def _along_b(points: list[tuple[int, float]], b: int, mode: str) -> float:
    for sample_b, value in points:
        if sample_b == b:
            return value
    if b <= points[0][0]:
        return points[0][1]
    if b >= points[-1][0]:
        return points[-1][1]
    for (b0, v0), (b1, v1) in zip(points, points[1:]):
        if b0 < b < b1:
            w = (math.log(b) - math.log(b0)) / (math.log(b1) - math.log(b0))
            if mode == "nearest":
                return v0 if w <= 0.5 else v1
            return math.exp((1.0 - w) * math.log(v0) + w * math.log(v1))
    raise AssertionError("unreachable: sorted bracket scan")


def slowdown_q(table: CalibrationTable, members: int) -> float:
    """Bandwidth slowdown for a collective of the given member count.

    A single member never contends, so members=1 is 1.0 regardless of the
    samples; otherwise exact hit, linear interpolation between bracketing
    member counts, clamped at the sampled range.
    """
    if members <= 1:
        return 1.0
    points = sorted((r.members, r.value) for r in table.q_samples)
    for sample_m, value in points:
        if sample_m == members:
            return value
    if members <= points[0][0]:
        return points[0][1]
    if members >= points[-1][0]:
        return points[-1][1]
    for (m0, v0), (m1, v1) in zip(points, points[1:]):
        if m0 < members < m1:
            w = (members - m0) / (m1 - m0)
            return (1.0 - w) * v0 + w * v1
    raise AssertionError("unreachable: sorted bracket scan")


def synthetic_rho_csv(coefficient: float = 2.0, micro_batches=(1, 2, 4, 8, 16, 32),
                      seq_length: int = 4096, hidden_size: int = 4096,
                      tensor_parallel: int = 1) -> str:
    """Render the standing synthetic utilization curve 1 + c/b as a table.

    Decreasing and saturating toward 1, the shape profiled utilization
    follows as tensors get fatter; used by the test fixtures.
    """
    lines = [",".join(RHO_HEADER)]
    for b in micro_batches:
        lines.append(f"{b},{seq_length},{hidden_size},{tensor_parallel},"
                     f"{1.0 + coefficient / b!r}")
    return "\n".join(lines) + "\n"
