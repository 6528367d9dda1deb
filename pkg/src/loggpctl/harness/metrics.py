"""Run metrics and cohort aggregates.

``sum_abs_error`` is the sum over GP ticks of the Euclidean task-space error
``||p(t_k) - p_ref(t_k)||`` in metres, ``max_force_norm`` the largest
``||u(t_k)||`` in newtons.  Failed runs are kept in the run table but left out
of every error and force aggregate.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .trial import RunLog

__all__ = ["SummaryMetrics", "LatencyStats", "summarize", "latency_stats", "aggregate", "subject_statistics"]


@dataclass
class SummaryMetrics:
    sum_abs_error: float
    max_force_norm: float
    failed: bool
    failure_time: float | None
    failure_reason: str
    n_ticks: int
    n_samples: int
    # learned term never exceeded max |y| seen + largest leaf sigma_f
    feedforward_bounded: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LatencyStats:
    update_p50: float
    update_p99: float
    update_max: float
    predict_p50: float
    predict_p99: float
    predict_max: float
    total_p50: float
    total_p99: float
    total_max: float
    total_mean: float
    frac_over_budget: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(log: RunLog) -> SummaryMetrics:
    if len(log):
        err = np.linalg.norm(log.p - log.p_ref, axis=1)
        force = np.linalg.norm(log.u, axis=1)
        sae, mfn = float(err.sum()), float(force.max())
    else:
        sae = mfn = 0.0
    bounded = None
    if log.kind == "gp" and len(log):
        y = log.y[np.isfinite(log.y).all(axis=1)]
        y_max = float(np.abs(y).max()) if y.size else 0.0
        bounded = bool(np.abs(log.u_ff).max() <= y_max + log.extra.get("sigma_f_max", 0.0) + 1e-12)
    return SummaryMetrics(
        sum_abs_error=sae,
        max_force_norm=mfn,
        failed=bool(log.failed),
        failure_time=float(log.failure_time) if log.failed else None,
        failure_reason=log.failure_reason,
        n_ticks=len(log),
        n_samples=int(log.n_samples),
        feedforward_bounded=bounded,
    )


def latency_stats(update, predict, budget: float) -> LatencyStats:
    """Percentiles (seconds) of per-tick update, predict and their sum."""
    update = np.asarray(update, dtype=float)
    predict = np.asarray(predict, dtype=float)
    ok = np.isfinite(update) & np.isfinite(predict)
    u, p = update[ok], predict[ok]
    if not u.size:
        nan = float("nan")
        return LatencyStats(nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, 0)
    tot = u + p
    q = lambda a, k: float(np.percentile(a, k))  # noqa: E731
    return LatencyStats(q(u, 50), q(u, 99), float(u.max()), q(p, 50), q(p, 99), float(p.max()),
                        q(tot, 50), q(tot, 99), float(tot.max()), float(tot.mean()),
                        float(np.mean(tot > budget)), int(tot.size))


def _std(values) -> float | None:
    # sample standard deviation; undefined below two values
    return float(np.std(values, ddof=1)) if len(values) >= 2 else None


def _mean(values) -> float | None:
    return float(np.mean(values)) if len(values) else None


def subject_statistics(per_subject: dict) -> dict:
    """Intra/inter-subject spread of one metric.

    ``per_subject`` maps subject -> list of values from successful runs.
    Intra-subject: std across a subject's runs, averaged over subjects with
    at least two runs.  Inter-subject: std of the subject means.
    """
    intra = [s for s in (_std(v) for v in per_subject.values()) if s is not None]
    means = [float(np.mean(v)) for v in per_subject.values() if len(v)]
    return {
        "intra_subject_std": _mean(intra),
        "inter_subject_std": _std(means),
        "subject_means": {str(k): (float(np.mean(v)) if len(v) else None) for k, v in per_subject.items()},
    }


def aggregate(rows: list[dict]) -> dict:
    """Per-variant aggregates over run rows (dicts with ``variant``,
    ``patient``, ``failed``, ``sum_abs_error``, ``max_force_norm``)."""
    out = {}
    for variant in sorted({r["variant"] for r in rows}):
        mine = [r for r in rows if r["variant"] == variant]
        ok = [r for r in mine if not r["failed"]]
        entry = {
            "n_runs": len(mine),
            "n_failed": len(mine) - len(ok),
            "failed_subjects": sorted({r["patient"] for r in mine if r["failed"]}),
        }
        for metric in ("sum_abs_error", "max_force_norm"):
            vals = [r[metric] for r in ok]
            per_subject = {}
            for r in mine:
                per_subject.setdefault(r["patient"], [])
                if not r["failed"]:
                    per_subject[r["patient"]].append(r[metric])
            entry[metric] = {"mean": _mean(vals), "std": _std(vals), **subject_statistics(per_subject)}
        out[variant] = entry
    return out
