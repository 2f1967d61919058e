"""Command line interface.

Subcommands:
  check   print both deployability inequalities with numbers (exit 2 on fail)
  run     execute a multi-seed experiment and persist traces + CSV reports
  sweep   one-at-a-time +/-30% sensitivity sweep over one parameter
  report  recompute summary statistics from persisted traces

Exit codes: 0 success, 2 gate failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (GateError, RunConfig, persist_result, recompute_summary,
                      run_experiment, sweep, write_sweep_csv)
from .hormones import check_stability, dt_bound, dt_bounds

EXIT_OK = 0
EXIT_GATE = 2
EXIT_CONFIG = 3


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config root must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def cmd_check(args) -> int:
    try:
        config = _load_config(args.config, {})
        params = config.hormone_params()
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        # dt violations surface as construction errors: still a gate result
        if "admissibility bound" in str(exc):
            print(f"dt gate: {exc}")
            return EXIT_GATE
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = check_stability(params, chi_max=args.chi_max)
    print("stability gate (decay dominance):")
    for line in report.lines():
        print("  " + line)
    bounds = dt_bounds(params, chi_max=args.chi_max)
    overall = dt_bound(params, chi_max=args.chi_max)
    print("step-size gate (explicit scheme):")
    print(f"  bound_c = {bounds['c']:.4f}, bound_u = {bounds['u']:.4f}, "
          f"overall = {overall:.4f}")
    dt_ok = params.dt < overall
    verdict = "pass" if dt_ok else "FAIL"
    print(f"  dt = {params.dt} < {overall:.4f}  [{verdict}]")
    if report.passed and dt_ok:
        print("all gates pass")
        return EXIT_OK
    print("gate failure")
    return EXIT_GATE


def cmd_run(args) -> int:
    overrides = {
        "task": args.task,
        "n_episodes": args.episodes,
        "n_seeds": args.seeds,
    }
    if args.warmup is not None:
        overrides["warmup_episodes"] = args.warmup
    if args.no_warm_start:
        overrides["warm_start_enabled"] = False
    try:
        config = _load_config(args.config, overrides)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(config)
    except GateError as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    persist_result(result, args.out)
    agg = result.aggregate
    print(f"task={config.task} seeds={config.n_seeds} "
          f"episodes={config.n_episodes}")
    print(f"rsr = {agg['rsr_mean']:.4f} +/- {agg['rsr_std']:.4f}")
    print(f"t_star_mean = {agg['t_star_mean_mean']:.3f} "
          f"+/- {agg['t_star_mean_std']:.3f}")
    print(f"criterion_rate = {agg['criterion_rate_mean']:.3f}")
    print(f"pearson_r = {agg['pearson_r_mean']:.4f}")
    print(f"outputs written to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        config = _load_config(args.config, {"task": args.task})
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = sweep(config, args.param, episodes=args.episodes)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / f"sweep_{args.param}.csv")
    for r in rows:
        if r.stable:
            print(f"{r.param}={r.value:.4f} (offset {r.offset:+.0%}): "
                  f"rsr={r.rsr:.3f} t_star_mean={r.t_star_mean:.2f}")
        else:
            print(f"{r.param}={r.value:.4f} (offset {r.offset:+.0%}): "
                  "UNSTABLE (gate-flagged, not run)")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rows = recompute_summary(args.indir)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    header = ["task", "seed", "rsr", "t_star_mean", "t_star_std",
              "e_cog_mean", "criterion_rate"]
    print(",".join(header))
    for row in rows:
        print(",".join(str(row[c]) for c in header))
    out = Path(args.indir) / "summary_recomputed.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float)
                              else str(row[c]) for c in header) + "\n")
    print(f"written {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hormind",
        description="hormonally regulated recursive reasoning benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="print deployability gates")
    p_check.add_argument("--config", default=None)
    p_check.add_argument("--chi-max", type=float, default=1.0)
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="run a multi-seed experiment")
    p_run.add_argument("--task", choices=("sudoku", "maze", "dde"),
                       default=None)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--episodes", type=int, default=None)
    p_run.add_argument("--warmup", type=int, default=None)
    p_run.add_argument("--seeds", type=int, default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--no-warm-start", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="one-at-a-time sensitivity sweep")
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--task", default=None)
    p_sweep.add_argument("--episodes", type=int, default=50)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="recompute summary from traces")
    p_report.add_argument("--in", dest="indir", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
