"""Cohort study: every patient runs every controller variant, once in a
training phase and then ``test_runs`` times in the test phase.

Aggregates are computed over test-phase runs only; training runs are logged
and reported but play the role of familiarisation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..human import PatientParams, load_cohort, sample_cohort
from .config import ExperimentConfig
from .export import SUMMARY_SCHEMA, write_json, write_run_csv
from .metrics import aggregate, latency_stats, summarize
from .trial import make_predictor, run_trial

__all__ = ["StudyReport", "run_study", "resolve_cohort", "surrogate_index", "run_seed"]


def resolve_cohort(config: ExperimentConfig) -> list[PatientParams]:
    c = config.cohort
    if c.cohort_file:
        cohort = load_cohort(c.cohort_file)
    else:
        cohort = sample_cohort(c.size, c.master_seed, dof=2, ranges=c.ranges)
    return cohort


def surrogate_index(config: ExperimentConfig, cohort) -> int:
    """Patient the TunedPD gains stand for: configured, or the median-proficiency member."""
    if config.cohort.surrogate is not None:
        if not 0 <= config.cohort.surrogate < len(cohort):
            raise ValueError("cohort.surrogate is out of range")
        return config.cohort.surrogate
    order = np.argsort([p.proficiency for p in cohort], kind="stable")
    return int(order[(len(cohort) - 1) // 2])


def run_seed(master_seed: int, patient: int, phase: str, run: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(patient), 0 if phase == "training" else 1, int(run)])
    return int(ss.generate_state(1)[0])


@dataclass
class StudyReport:
    rows: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    surrogate: dict = field(default_factory=dict)
    latency: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    logs: list = field(default_factory=list)


def _summary_payload(config, cohort, rows, aggregates, surrogate, complete):
    return {
        "schema": SUMMARY_SCHEMA,
        "complete": complete,
        "config": config.to_dict(),
        "cohort": [p.to_dict() for p in cohort],
        "runs": rows,
        "aggregates": aggregates,
        "surrogate": surrogate,
    }


def _surrogate_report(rows, idx):
    out = {"patient": idx}
    for v in ("tuned", "gp"):
        vals = [r["sum_abs_error"] for r in rows
                if r["patient"] == idx and r["variant"] == v and r["phase"] == "test" and not r["failed"]]
        out[f"{v}_mean_sum_abs_error"] = float(np.mean(vals)) if vals else None
    t, g = out["tuned_mean_sum_abs_error"], out["gp_mean_sum_abs_error"]
    out["relative_difference"] = abs(t - g) / g if (t is not None and g) else None
    return out


def run_study(config: ExperimentConfig, out_dir=None, keep_logs: bool = False, progress=None) -> StudyReport:
    """Run the full protocol.  With ``out_dir`` the per-run CSVs, the summary
    JSON (``summary.json``), the config echo (``config.json``) and the latency
    report (``latency.json``) are written there; a partial summary is written
    if a run raises."""
    cohort = resolve_cohort(config)
    if not cohort:
        raise ValueError("cohort is empty")
    sc = config.study
    master = config.cohort.master_seed
    sur = surrogate_index(config, cohort)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        (out / "runs").mkdir(parents=True, exist_ok=True)
        write_json(config.to_dict(), out / "config.json")
    report = StudyReport()
    lat_update, lat_predict = [], []
    phases = [("training", r) for r in range(sc.training_runs)] + [("test", r) for r in range(sc.test_runs)]
    try:
        for i, patient in enumerate(cohort):
            gp_models = {}
            for variant in sc.variants:
                for phase, r in phases:
                    seed = run_seed(master, i, phase, r)
                    predictor = None
                    shared = sc.gp_persistence == "patient" or (sc.gp_persistence == "test_phase"
                                                               and phase == "test")
                    if variant == "gp" and shared:
                        if not gp_models:
                            gp_seed = np.random.SeedSequence([int(master), i, 2])
                            gp_models["model"] = make_predictor(config, config.plant.build().dof,
                                                                np.random.default_rng(gp_seed))
                        predictor = gp_models["model"]
                    t0 = time.perf_counter()
                    log = run_trial(config, variant, patient, seed, predictor=predictor, patient_index=i)
                    m = summarize(log)
                    row = {"patient": i, "variant": variant, "phase": phase, "run": r, "seed": seed,
                           **m.to_dict()}
                    report.rows.append(row)
                    if variant == "gp":
                        lat_update.append(log.lat_update)
                        lat_predict.append(log.lat_predict)
                    if out is not None:
                        write_run_csv(log, out / "runs" / f"p{i:02d}_{variant}_{phase}{r}.csv")
                    if keep_logs:
                        report.logs.append(log)
                    if progress is not None:
                        progress(row, time.perf_counter() - t0)
    finally:
        complete = len(report.rows) == len(cohort) * len(sc.variants) * len(phases)
        test_rows = [r for r in report.rows if r["phase"] == "test"]
        report.aggregates = aggregate(test_rows) if test_rows else {}
        report.surrogate = _surrogate_report(report.rows, sur)
        report.summary = _summary_payload(config, cohort, report.rows, report.aggregates, report.surrogate,
                                          complete)
        if lat_update:
            report.latency = latency_stats(np.concatenate(lat_update), np.concatenate(lat_predict),
                                           config.tau).to_dict()
        if out is not None:
            write_json(report.summary, out / "summary.json")
            write_json({"schema": "loggpctl.latency/1", "gp_ticks": report.latency}, out / "latency.json")
    return report
