"""Command-line entry point: ``loggpctl {trial,study,bench,export-cohort,import-cohort}``.

Output directory precedence: ``--out`` flag, then ``LOGGPCTL_OUT_DIR``, then
the config's ``output_dir``.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import snapshot
from .harness.bench import exact_gp_baseline, run_bench
from .harness.config import load_config, save_config
from .harness.export import dumps_json, write_json, write_run_csv
from .harness.metrics import latency_stats, summarize
from .harness.study import resolve_cohort, run_study
from .harness.trial import make_predictor, run_trial, trial_seeds
from .human import load_cohort, save_cohort
from .validation import ConfigError

__all__ = ["main", "build_parser"]


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(float(s)) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loggpctl", description="Local-GP assisted control simulation harness.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trial", help="run one trial and write its CSV")
    p.add_argument("--config", type=Path, help="config JSON (defaults when omitted)")
    p.add_argument("--controller", required=True, choices=["low", "high", "gp", "tuned"])
    p.add_argument("--patient", type=int, required=True, help="cohort index")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--snapshot", type=Path, help="gp only: write the learned trees to this file")

    p = sub.add_parser("study", help="run the full cohort protocol")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("bench", help="per-tick update+predict latency versus stream size")
    p.add_argument("--config", type=Path)
    p.add_argument("--sizes", type=_sizes, default=[1000, 10000, 100000])
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--exact-baseline", type=int, default=0, metavar="N",
                   help="also time one exact-GP insert+predict at N points")
    p.add_argument("--out", type=Path, help="write the report JSON here instead of stdout")

    p = sub.add_parser("export-cohort", help="write the config's cohort to a JSON file")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("import-cohort", help="write a config that uses a cohort file")
    p.add_argument("cohort", type=Path)
    p.add_argument("--config", type=Path, help="base config")
    p.add_argument("--out", type=Path, required=True, help="new config JSON")
    return ap


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out is not None else Path(cfg.output_dir)


def _cmd_trial(args) -> int:
    cfg = load_config(args.config)
    cohort = resolve_cohort(cfg)
    if not 0 <= args.patient < len(cohort):
        raise ConfigError(f"--patient must lie in [0, {len(cohort) - 1}]")
    if args.snapshot is not None and args.controller != "gp":
        raise ConfigError("--snapshot needs --controller gp")
    predictor = None
    if args.controller == "gp":
        # same seeding as run_trial's own default model
        predictor = make_predictor(cfg, cfg.plant.build().dof, trial_seeds(args.seed, cohort[args.patient])[2])
    log = run_trial(cfg, args.controller, cohort[args.patient], args.seed, predictor=predictor,
                    patient_index=args.patient)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_run_csv(log, out / f"trial_p{args.patient:02d}_{args.controller}_s{args.seed}.csv")
    report = {"csv": str(csv_path), **summarize(log).to_dict()}
    if predictor is not None:
        report["latency"] = latency_stats(log.lat_update, log.lat_predict, cfg.tau).to_dict()
        if args.snapshot is not None:
            report["snapshot"] = str(snapshot.save(predictor, args.snapshot))
    sys.stdout.write(dumps_json(report))
    return 0


def _cmd_study(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)

    def progress(row, seconds):
        print(f"p{row['patient']:02d} {row['variant']:<5} {row['phase']:<8} {row['run']} "
              f"sae={row['sum_abs_error']:.3f} fmax={row['max_force_norm']:.2f} "
              f"{'FAILED ' + row['failure_reason'] if row['failed'] else 'ok'} ({seconds:.1f}s)",
              file=sys.stderr)

    report = run_study(cfg, out, progress=None if args.quiet else progress)
    sys.stdout.write(dumps_json({"out": str(out), "aggregates": report.aggregates,
                                 "surrogate": report.surrogate}))
    return 0


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    report = run_bench(cfg, args.sizes, window=args.window)
    if args.exact_baseline:
        report["exact_baseline"] = exact_gp_baseline(args.exact_baseline, cfg)
    if args.out is not None:
        write_json(report, args.out)
    else:
        sys.stdout.write(dumps_json(report))
    return 0


def _cmd_export_cohort(args) -> int:
    cfg = load_config(args.config)
    save_cohort(resolve_cohort(cfg), args.out)
    print(args.out)
    return 0


def _cmd_import_cohort(args) -> int:
    cohort = load_cohort(args.cohort)
    if not cohort:
        raise ConfigError(f"{args.cohort}: cohort is empty")
    cfg = load_config(args.config)
    sur = cfg.cohort.surrogate
    if sur is not None and sur >= len(cohort):
        sur = None
    cohort_cfg = dataclasses.replace(cfg.cohort, size=len(cohort), surrogate=sur,
                                     cohort_file=str(Path(args.cohort).resolve()))
    save_config(cfg.replace(cohort=cohort_cfg), args.out)
    print(args.out)
    return 0


_COMMANDS = {
    "trial": _cmd_trial,
    "study": _cmd_study,
    "bench": _cmd_bench,
    "export-cohort": _cmd_export_cohort,
    "import-cohort": _cmd_import_cohort,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"loggpctl {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
