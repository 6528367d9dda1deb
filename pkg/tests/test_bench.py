import numpy as np

from loggpctl.harness.bench import exact_gp_baseline, run_bench, synthetic_stream
from loggpctl.harness.config import ExperimentConfig


def test_stream_shape_and_determinism():
    cfg = ExperimentConfig()
    a = list(synthetic_stream(20, cfg, seed=1))
    b = list(synthetic_stream(20, cfg, seed=1))
    assert all(x.shape == (7,) and y.shape == (2,) for x, y in a)
    assert all(np.array_equal(xa, xb) and np.array_equal(ya, yb) for (xa, ya), (xb, yb) in zip(a, b))
    np.testing.assert_allclose([x[-1] for x, _ in a], np.arange(20) * cfg.tau)


def test_report_structure():
    seen = []
    report = run_bench(ExperimentConfig(), sizes=[200, 60], window=50, progress=lambda n, s: seen.append(n))
    assert seen == [60, 200] and report["window"] == 50
    assert set(report["sizes"]) == {"60", "200"}
    for stats in report["sizes"].values():
        assert stats["n"] == 50 and 0 < stats["total_p50"] <= stats["total_p99"] <= stats["total_max"]
        assert stats["leaves"] >= 2
    assert set(report["growth_ratio"]) == {"60->200"}


def test_exact_baseline_runs():
    out = exact_gp_baseline(50, ExperimentConfig(), repeats=2)
    assert out["n"] == 50 and out["per_tick_s"] == 2 * out["per_output_s"] > 0
