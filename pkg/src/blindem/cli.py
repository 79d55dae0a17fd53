"""Command line front end: ``run``, ``trial``, and ``sweep`` subcommands."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (
    RunConfig,
    emit_results,
    fmt_float,
    run_experiment,
    run_trial,
    summarize,
    sweep_failure_rates,
)


def _add_config_flags(p: argparse.ArgumentParser, with_trials: bool = True) -> None:
    p.add_argument("--profile", type=int, default=3, choices=(2, 3, 4),
                   help="channel memory L")
    p.add_argument("--snr-db", type=float, default=6.0)
    p.add_argument("--sigma-h2", type=float, default=0.5,
                   help="initialization error variance")
    p.add_argument("--info-bits", type=int, default=2000)
    if with_trials:
        p.add_argument("--n-trials", type=int, default=200)
    p.add_argument("--n-turbo", type=int, default=7)
    p.add_argument("--n-em-per-turbo", type=int, default=5)
    p.add_argument("--detector", choices=("off", "phase", "joint"), default="off")
    p.add_argument("--margin-threshold", type=float, default=25.0)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--mse-mode", choices=("means", "taps"), default="means")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: BLINDEM_WORKERS or CPU count)")


def _config_from_args(args, n_trials: int | None = None) -> RunConfig:
    return RunConfig(
        profile=args.profile,
        snr_db=args.snr_db,
        sigma_h2=args.sigma_h2,
        info_bits=args.info_bits,
        n_trials=n_trials if n_trials is not None else args.n_trials,
        n_turbo=args.n_turbo,
        n_em_per_turbo=args.n_em_per_turbo,
        detector=args.detector,
        margin_threshold=args.margin_threshold,
        base_seed=args.base_seed,
        mse_mode=args.mse_mode,
        out_csv=getattr(args, "out_csv", None),
        out_summary=getattr(args, "out_summary", None),
    )


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    summary, _ = run_experiment(config, n_workers=args.workers)
    print(f"trials            {summary.n_trials}")
    print(f"failure_rate      {fmt_float(summary.failure_rate)}")
    print(f"refinement_rate   {fmt_float(summary.refinement_rate)}")
    print(f"final_mse_median  {fmt_float(summary.mse_median[-1])}")
    print(f"final_mse_mean    {fmt_float(summary.mse_mean[-1])}")
    if config.out_csv:
        print(f"trials csv        {config.out_csv}")
    if config.out_summary:
        print(f"summary           {config.out_summary}")
    return 0


def _cmd_trial(args) -> int:
    config = _config_from_args(args, n_trials=1)
    record = run_trial(config, args.trial_id)
    print("em_iter  mse")
    for it, m in enumerate(record.mse_per_em_iteration, start=1):
        print(f"{it:7d}  {fmt_float(m)}")
    print(f"final_mse   {fmt_float(record.final_mse)}")
    print(f"failed      {int(record.failed)}")
    print(f"phase_idx   {record.detected_phase_index}")
    print(f"shift_idx   {record.detected_shift_index}")
    print(f"refined     {int(record.refinement_applied)}")
    if record.info_bit_error_count is not None:
        print(f"bit_errors  {record.info_bit_error_count}")
    if args.out_csv or args.out_summary:
        summary = summarize([record], config)
        emit_results([record], summary, args.out_csv, args.out_summary)
    return 0


def _cmd_sweep(args) -> int:
    base = _config_from_args(args)
    grid = [float(v) for v in args.sigma_h2_grid.split(",") if v]
    detectors = [d.strip() for d in args.detectors.split(",") if d.strip()]
    rows = sweep_failure_rates(base, grid, detectors, n_workers=args.workers)
    lines = ["sigma_h2,detector,failure_rate,refinement_rate,n_trials"]
    for row in rows:
        lines.append(
            f"{fmt_float(row['sigma_h2'])},{row['detector']},"
            f"{fmt_float(row['failure_rate'])},{fmt_float(row['refinement_rate'])},"
            f"{row['n_trials']}"
        )
    text = "\n".join(lines) + "\n"
    if args.out_csv:
        with open(args.out_csv, "w", newline="\n") as f:
            f.write(text)
        print(f"sweep csv  {args.out_csv}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindem",
        description="Monte Carlo experiments for code-aided EM blind channel estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full seeded experiment")
    _add_config_flags(p_run)
    p_run.add_argument("--out-csv", default=None, help="per-trial CSV path")
    p_run.add_argument("--out-summary", default=None, help="key-value summary path")
    p_run.set_defaults(func=_cmd_run)

    p_trial = sub.add_parser("trial", help="single trial with per-iteration dump")
    _add_config_flags(p_trial, with_trials=False)
    p_trial.add_argument("--trial-id", type=int, default=0)
    p_trial.add_argument("--out-csv", default=None)
    p_trial.add_argument("--out-summary", default=None)
    p_trial.set_defaults(func=_cmd_trial)

    p_sweep = sub.add_parser("sweep", help="failure rate over a sigma-h2 grid")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--sigma-h2-grid", default="0.5,1.0,2.0",
                         help="comma-separated initialization error variances")
    p_sweep.add_argument("--detectors", default="off,phase,joint",
                         help="comma-separated detector modes")
    p_sweep.add_argument("--out-csv", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
