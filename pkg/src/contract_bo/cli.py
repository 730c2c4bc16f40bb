"""Command line entry point: ``python -m contract_bo {bench,optimize,train,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, marl
from .cleanup import CleanupConfig, desk_config
from .core import ConfigurationError, DesignPoint
from .cpmes import ProblemConfig, RunAborted, load_snapshot, save_snapshot
from .synthetic import evaluate as synthetic_evaluate
from .synthetic import generate

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _load_json(path: str | None) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _print_table(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))


def cmd_bench(args) -> int:
    base = _load_json(args.config)
    for key, val in (("mode", args.mode), ("methods", args.methods), ("seeds", args.seeds),
                     ("budgets", args.budgets), ("batch_sizes", args.batch_sizes), ("workers", args.workers)):
        if val is not None:
            base[key] = val
    cfg = harness.ExperimentConfig.from_dict(base)
    result = harness.run_benchmark(cfg)
    out = Path(args.out or cfg.output_dir or "bench_out")
    harness.write_outputs(result, out)
    for b in result.report.batch_sizes:
        print(f"{result.report.metric} (batch {b}):")
        _print_table(result.report.table(b))
    for name, comp in sorted(result.components.items()):
        print(f"{name}: ||R|| log-log slope over t in [5, 20] = {comp.growth_slope():.3f}")
    print(f"wrote {out} in {result.seconds:.1f}s")
    for f in result.failures:
        print(f"FAILED {f['method']} batch={f['batch_size']} seed={f['seed']}: {f['error']}", file=sys.stderr)
    return EXIT_FAILED if result.failures else EXIT_OK


def cmd_optimize(args) -> int:
    if args.resume:
        pc, trace = load_snapshot(args.resume)
    else:
        overrides = _load_json(args.config)
        overrides.update(seed=args.seed, mode=args.mode)
        if args.budget is not None:
            overrides["budget"] = args.budget
        if args.batch_size is not None:
            overrides["batch_size"] = args.batch_size
        pc, trace = ProblemConfig.from_dict(overrides), None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if pc.mode == "synthetic":
        inst = generate(pc.seed, pc.n_baseline, pc.max_added, pc.alpha_grid_size)
        evaluator = lambda d: synthetic_evaluate(inst, d)  # noqa: E731
    else:
        evaluator = marl.MarlEvaluator(desk_config(**_load_json(args.env)),
                                       marl.TrainConfig.from_dict(_load_json(args.train)),
                                       seed=pc.seed, min_return=pc.min_return)
    snap = out / "snapshot.json"
    try:
        trace = harness.RUNNERS[args.method](pc, evaluator, trace=trace, snapshot=snap)
    except RunAborted as exc:
        print(f"run aborted: {exc}; partial trace in {snap}", file=sys.stderr)
        return EXIT_FAILED
    save_snapshot(snap, pc, trace)
    harness.write_trace_csv(trace, out / "trace.csv")
    harness.emit_feasible_heatmap([trace], out / "feasible_heatmap.csv")
    best = max((r for r in trace.records if r.feasible), key=lambda r: r.principal_objective, default=None)
    if best is None:
        print("no feasible design found")
    else:
        print(f"best feasible: alpha={best.design.alpha} n_added={best.design.n_added} "
              f"objective={best.principal_objective:.4f}")
    if pc.mode == "synthetic":
        opt = inst.optimum
        print(f"true optimum: alpha={opt[0].alpha} n_added={opt[0].n_added} objective={opt[1]:.4f}")
    return EXIT_OK


def cmd_train(args) -> int:
    env = CleanupConfig.from_dict(_load_json(args.env)) if args.full_map else desk_config(**_load_json(args.env))
    tc = marl.TrainConfig.from_dict({**_load_json(args.train), **({"episodes": args.episodes} if args.episodes else {})})
    design = DesignPoint(args.alpha, args.n_added)
    report = marl.train(design, env, tc, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    report.curve_to_csv(out / "curve.csv", tc.moving_average)
    print(f"welfare={report.welfare:.3f} apples@150={report.apples_at(min(150, env.episode_length)):.1f} "
          f"converged={report.converged}")
    if args.baseline:
        base = marl.TrainReport.from_json(Path(args.baseline).read_text())
        rec = marl.evaluate_contract(report, base.harvester_returns, args.min_return)
        print(f"ir_slack={[round(s, 3) for s in rec.ir_slack_baseline]} phi={rec.feasibility_indicator} "
              f"feasible={rec.feasible}")
    return EXIT_OK


def cmd_report(args) -> int:
    runs = harness.load_runs(Path(args.runs))
    if not runs:
        print(f"no run archives under {args.runs}", file=sys.stderr)
        return EXIT_FAILED
    budgets = args.budgets or tuple(sorted({t for r in runs for t in (4, 8, 12, 16, 20) if t <= r.trace.n_evaluations}))
    report = harness.aggregate(runs, budgets)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        harness.write_report(report, out)
        harness.emit_feasible_heatmap([r.trace for r in runs], out / "feasible_heatmap.csv")
    for b in report.batch_sizes:
        print(f"{report.metric} (batch {b}):")
        _print_table(report.table(b))
    failures_file = Path(args.runs).parent / "failures.json"
    failures = json.loads(failures_file.read_text()) if failures_file.exists() else []
    for f in failures:
        print(f"FAILED {f['method']} batch={f['batch_size']} seed={f['seed']}: {f['error']}", file=sys.stderr)
    return EXIT_FAILED if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contract-bo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    b = sub.add_parser("bench", help="paired-seed benchmark of several methods")
    b.add_argument("--config", help="ExperimentConfig JSON")
    b.add_argument("--mode", choices=["synthetic", "marl"])
    b.add_argument("--methods", type=_names)
    b.add_argument("--seeds", type=_ints)
    b.add_argument("--budgets", type=_ints)
    b.add_argument("--batch-sizes", dest="batch_sizes", type=_ints)
    b.add_argument("--workers", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("optimize", help="single optimization run")
    o.add_argument("--mode", choices=["synthetic", "marl"], default="synthetic")
    o.add_argument("--method", choices=sorted(harness.RUNNERS), default="cpmes")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--budget", type=int)
    o.add_argument("--batch-size", dest="batch_size", type=int)
    o.add_argument("--config", help="ProblemConfig overrides (JSON)")
    o.add_argument("--env", help="environment overrides (JSON, marl mode)")
    o.add_argument("--train", help="training overrides (JSON, marl mode)")
    o.add_argument("--resume", help="snapshot JSON to continue from")
    o.add_argument("--out", default="optimize_out")
    o.set_defaults(func=cmd_optimize)

    t = sub.add_parser("train", help="train agents under one contract")
    t.add_argument("--alpha", type=float, default=0.0)
    t.add_argument("--n-added", dest="n_added", type=int, default=0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--episodes", type=int)
    t.add_argument("--env", help="environment overrides (JSON)")
    t.add_argument("--train", help="training overrides (JSON)")
    t.add_argument("--full-map", action="store_true", help="use the full-size map instead of the desk layout")
    t.add_argument("--baseline", help="baseline report.json for IR slack")
    t.add_argument("--min-return", dest="min_return", type=float, default=0.0)
    t.add_argument("--out", default="train_out")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="aggregate archived runs")
    r.add_argument("runs", help="directory of run JSON archives")
    r.add_argument("--budgets", type=_ints)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
