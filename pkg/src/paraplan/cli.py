"""Command-line front end for the training-strategy planner.

Exit codes: 0 success, 2 invalid input, 3 no feasible strategy / out of
memory. All output on stdout is deterministic; wall-clock search timing
goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import calibration, costmodel, memory, pipeline, report, search
from .config import derive_strategy, parse_configs, validate_strategy
from .errors import (Infeasible, InvalidValue, NoFeasibleStrategy,
                     PlannerError)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paraplan",
        description="Plan throughput-optimal 3D-parallel transformer training.")
    sub = parser.add_subparsers(dest="command", required=True)

    plan_cmd = sub.add_parser("plan", help="rank parallel strategies by estimated time")
    _add_planning_flags(plan_cmd)
    plan_cmd.add_argument("--top-k", type=int, default=5,
                          help="number of ranked strategies to report (default 5)")
    plan_cmd.add_argument("--no-prune", action="store_true",
                          help="exhaustive search, no bound pruning or early stop")
    plan_cmd.add_argument("--format", choices=("table", "json", "csv"),
                          default="table")
    plan_cmd.add_argument("--out", help="write the report here instead of stdout")
    plan_cmd.add_argument("--plot", help="also render the ranking figure (PNG)")
    plan_cmd.set_defaults(handler=run_plan)

    est_cmd = sub.add_parser("estimate", help="full breakdown for one strategy")
    _add_planning_flags(est_cmd)
    est_cmd.add_argument("--strategy", required=True, metavar="d,t,p,b",
                         help="comma-separated parallel degrees and micro batch")
    est_cmd.add_argument("--format", choices=("table", "json"), default="table")
    est_cmd.set_defaults(handler=run_estimate)

    sim_cmd = sub.add_parser("simulate", help="discrete-event 1F1B schedule")
    sim_cmd.add_argument("--stages", type=int, required=True)
    sim_cmd.add_argument("--micro-batches", type=int, required=True)
    sim_cmd.add_argument("--forward", type=float, required=True,
                         help="forward seconds per micro batch per stage")
    sim_cmd.add_argument("--backward", type=float, required=True,
                         help="backward seconds per micro batch per stage")
    sim_cmd.add_argument("--trace", help="write the event trace CSV here")
    sim_cmd.add_argument("--plot", help="also render the schedule figure (PNG)")
    sim_cmd.set_defaults(handler=run_simulate)

    sweep_cmd = sub.add_parser("sweep", help="evaluate a batch-size sweep")
    _add_planning_flags(sweep_cmd)
    sweep_cmd.add_argument("--strategy", required=True, metavar="d,t,p,b")
    sweep_cmd.add_argument("--param", choices=("gbs", "mbs"), required=True,
                           help="gbs sweeps the global batch, mbs the micro batch")
    sweep_cmd.add_argument("--values", required=True,
                           help="comma-separated ascending integers")
    sweep_cmd.add_argument("--out", help="write the CSV here instead of stdout")
    sweep_cmd.add_argument("--plot", help="also render the sweep figure (PNG)")
    sweep_cmd.set_defaults(handler=run_sweep)

    cal_cmd = sub.add_parser("calibrate",
                             help="validate and normalize calibration files")
    cal_cmd.add_argument("--profile", action="append", required=True,
                         help="calibration file (CSV or JSON bundle); repeatable")
    cal_cmd.add_argument("--out", required=True,
                         help="write the normalized JSON bundle here")
    cal_cmd.set_defaults(handler=run_calibrate)
    return parser


def _add_planning_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--hardware", required=True, help="hardware JSON document")
    cmd.add_argument("--model", required=True, help="model JSON document")
    cmd.add_argument("--calibration", action="append", required=True,
                     help="calibration file (bundle or CSV); repeatable")
    cmd.add_argument("--global-batch", type=int, required=True)
    cmd.add_argument("--samples", type=int, required=True,
                     help="total training samples for the run estimate")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidValue(f"cannot read {path}: {exc}") from exc


def _load_request(args, prune: bool = True, top_k: int = 5) -> search.PlanRequest:
    hw, model = parse_configs(_read(args.hardware), _read(args.model))
    table = calibration.load_calibration(*[_read(p) for p in args.calibration])
    return search.PlanRequest(
        hardware=hw, model=model, calibration=table,
        global_batch_size=args.global_batch, samples=args.samples,
        top_k=top_k, prune=prune)


def _parse_strategy_flag(text: str, global_batch: int):
    parts = text.split(",")
    if len(parts) != 4:
        raise InvalidValue(
            f"--strategy expects 'd,t,p,b', got {text!r}")
    try:
        d, t, p, b = (int(part) for part in parts)
    except ValueError as exc:
        raise InvalidValue(f"--strategy expects integers, got {text!r}") from exc
    return derive_strategy(d, t, p, b, global_batch)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run_plan(args) -> int:
    req = _load_request(args, prune=not args.no_prune, top_k=args.top_k)
    ranked = search.plan(req)
    if args.format == "json":
        rendered = report.render_plan_json(ranked) + "\n"
    elif args.format == "csv":
        rendered = report.render_plan_csv(ranked)
    else:
        rendered = report.render_plan_table(ranked)
    _emit(rendered, args.out)
    if args.plot:
        from . import plots
        plots.save_plan_figure(ranked, args.plot)
    print(f"search took {ranked.search_duration:.3f}s", file=sys.stderr)
    return EXIT_OK


def run_estimate(args) -> int:
    req = _load_request(args)
    strategy = _parse_strategy_flag(args.strategy, args.global_batch)
    check = validate_strategy(strategy, req.hardware, req.model)
    if not check.ok:
        raise InvalidValue("; ".join(check.violations))
    if memory.is_oom(req.hardware, req.model, strategy):
        estimate = memory.memory_estimate(req.model, strategy)
        raise Infeasible(
            f"strategy {strategy.label()} needs "
            f"{estimate.per_npu / 2**30:.2f} GiB/NPU but only "
            f"{req.hardware.memory_per_npu / 2**30:.2f} GiB is available")
    breakdown = costmodel.total_breakdown(req.hardware, req.model,
                                          req.calibration, strategy,
                                          samples=req.samples)
    coefficients = costmodel.coefficient_set(req.hardware, req.model,
                                             req.calibration, strategy)
    estimate = memory.memory_estimate(req.model, strategy)
    if args.format == "json":
        payload = report.estimate_to_dict(strategy, breakdown, coefficients, estimate)
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(report.render_estimate_table(
            strategy, breakdown, coefficients, estimate))
    return EXIT_OK


def run_simulate(args) -> int:
    timing = pipeline.StageTiming(
        forward=args.forward, backward=args.backward,
        stages=args.stages, micro_batches=args.micro_batches)
    trace = pipeline.simulate_1f1b(timing)
    closed = pipeline.closed_form_bubble(timing)
    error = pipeline.bubble_vs_closed_form(timing)
    if args.micro_batches < args.stages:
        print("warning: m < p regime, the closed form is outside its validity range",
              file=sys.stderr)
    print(f"makespan:          {trace.makespan!r}")
    print(f"bubble:            {trace.bubble!r}")
    print(f"closed-form bubble: {closed!r}")
    print(f"relative error:    {error!r}")
    if args.trace:
        Path(args.trace).write_text(pipeline.trace_to_csv(trace))
    if args.plot:
        from . import plots
        plots.save_schedule_figure(trace, args.plot)
    return EXIT_OK


def run_sweep(args) -> int:
    req = _load_request(args)
    strategy = _parse_strategy_flag(args.strategy, args.global_batch)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidValue(f"--values expects integers, got {args.values!r}") from exc
    parameter = "global_batch" if args.param == "gbs" else "micro_batch"
    points = search.sweep(req, strategy, parameter, values)
    _emit(report.sweep_to_csv(points), args.out)
    if args.plot:
        from . import plots
        plots.save_sweep_figure(points, parameter, args.plot)
    return EXIT_OK


def run_calibrate(args) -> int:
    rho, q = [], []
    mode = None
    for path in args.profile:
        got_rho, got_q, got_mode = calibration.parse_samples(_read(path))
        rho.extend(got_rho)
        q.extend(got_q)
        mode = got_mode or mode
    calibration.check_rho_samples(rho)
    calibration.check_q_samples(q)
    payload = {"interpolation_mode": mode or "log_linear_b"}
    if rho:
        payload["rho"] = [
            {"b": r.micro_batch, "s": r.seq_length, "h": r.hidden_size,
             "t": r.tensor_parallel, "rho": r.value}
            for r in sorted(rho, key=lambda r: (r.shape_key, r.micro_batch))]
    if q:
        payload["q"] = [{"members": r.members, "q": r.value}
                        for r in sorted(q, key=lambda r: r.members)]
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(rho)} utilization and {len(q)} slowdown samples to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (NoFeasibleStrategy, Infeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PlannerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
