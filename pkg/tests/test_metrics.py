import math

import numpy as np
import pytest

from loggpctl.harness.metrics import aggregate, latency_stats, subject_statistics, summarize
from loggpctl.harness.trial import RunLog


def test_summarize_by_hand():
    log = RunLog.allocate("high", 0, 0, 3, 2)
    log.p[:] = [[0.0, 0.0], [0.3, 0.4], [1.0, 0.0]]
    log.p_ref[:] = 0.0
    log.u[:] = [[3.0, 4.0], [0.0, 1.0], [-6.0, 8.0]]
    m = summarize(log)
    assert m.sum_abs_error == pytest.approx(1.5)
    assert m.max_force_norm == pytest.approx(10.0)
    assert not m.failed and m.failure_time is None and m.feedforward_bounded is None


def test_feedforward_bound_flag():
    log = RunLog.allocate("gp", 0, 0, 2, 1)
    log.p[:] = log.p_ref[:] = log.u[:] = 0.0
    log.y[:] = [[np.nan], [2.0]]
    log.u_ff[:] = [[0.0], [2.5]]
    log.extra["sigma_f_max"] = 1.0
    assert summarize(log).feedforward_bounded
    log.u_ff[1] = 3.5
    assert not summarize(log).feedforward_bounded


def test_latency_percentiles():
    u = np.arange(1, 101) * 1e-4
    p = np.full(100, 1e-4)
    s = latency_stats(np.r_[u, np.nan], np.r_[p, 1.0], budget=5.05e-3)
    assert s.n == 100
    assert s.total_max == pytest.approx(1.01e-2)
    assert s.total_p50 == pytest.approx(np.percentile(u + p, 50))
    assert s.frac_over_budget == pytest.approx(0.51)
    assert math.isnan(latency_stats([], [], 1.0).total_p99)


def test_subject_statistics_by_hand():
    s = subject_statistics({0: [1.0, 3.0], 1: [5.0, 5.0], 2: [7.0]})
    # intra: mean of std(ddof=1) over subjects with two runs = (sqrt 2 + 0) / 2
    assert s["intra_subject_std"] == pytest.approx(math.sqrt(2) / 2)
    # inter: std(ddof=1) of means 2, 5, 7
    assert s["inter_subject_std"] == pytest.approx(np.std([2.0, 5.0, 7.0], ddof=1))


def row(patient, variant, sae, force, failed=False):
    return {"patient": patient, "variant": variant, "failed": failed, "sum_abs_error": sae, "max_force_norm": force}


def test_aggregate_excludes_failed_runs():
    rows = [row(0, "low", 10.0, 1.0), row(0, "low", 1e9, 1e9, failed=True), row(1, "low", 20.0, 3.0),
            row(0, "gp", 5.0, 2.0)]
    agg = aggregate(rows)
    low = agg["low"]
    assert low["n_runs"] == 3 and low["n_failed"] == 1 and low["failed_subjects"] == [0]
    assert low["sum_abs_error"]["mean"] == pytest.approx(15.0)
    assert low["sum_abs_error"]["std"] == pytest.approx(np.std([10.0, 20.0], ddof=1))
    assert low["max_force_norm"]["inter_subject_std"] == pytest.approx(np.std([1.0, 3.0], ddof=1))
    assert agg["gp"]["sum_abs_error"]["std"] is None
    assert list(agg) == ["gp", "low"]
