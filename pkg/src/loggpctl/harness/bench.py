"""Latency benchmark of the learning path.

A two-output predictor on seven inputs is fed a synthetic stream shaped like
a trial (position, velocity and acceleration along the rounded rectangle,
time advancing at the GP rate, smooth targets plus noise).  Around each
requested size ``N`` a window of ticks is timed: one ``update_vector``
followed by one ``predict_vector``, exactly as in the control loop.
"""
from __future__ import annotations

import gc
import time

import numpy as np

from .. import gp_exact
from ..control import reference
from ..gp_exact import Hyperparameters
from ..loggp import warm_up as warm_up_tree
from .config import ExperimentConfig
from .metrics import latency_stats
from .trial import make_predictor

__all__ = ["synthetic_stream", "run_bench", "exact_gp_baseline"]


def synthetic_stream(n: int, config: ExperimentConfig, seed=0):
    """Yield ``n`` pairs ``(x, y)`` with ``x = (q, qdot, qddot, t)`` and ``y`` in R^2."""
    rng = np.random.default_rng(seed)
    tau = config.tau
    for k in range(n):
        t = k * tau
        r = reference(t, config.reference)
        q = r.q + 0.005 * np.sin(0.7 * t + np.array([0.0, 1.3]))
        x = np.concatenate([q, r.qdot, r.qddot, [t]])
        y = np.array([
            40.0 * q[0] - 5.0 * r.qdot[0] + 0.5 * np.sin(2.0 * t),
            30.0 * q[1] - 3.0 * r.qdot[1] + 0.5 * np.cos(1.5 * t),
        ]) * np.exp(-t / 300.0) + rng.normal(0.0, 0.05, 2)
        yield x, y


def run_bench(config: ExperimentConfig, sizes=(1000, 10000, 100000), window: int = 500, seed: int = 0,
              progress=None) -> dict:
    """Per-tick update+predict latency at each stream size in ``sizes``.

    Timing windows start at ``N - window`` (so the model holds about ``N``
    samples while timed).  Returns a JSON-ready report with percentile tables
    per size, the growth ratio of mean latency between consecutive sizes and
    the fraction of ticks over the GP period.
    """
    sizes = sorted(int(s) for s in sizes)
    if not sizes or sizes[0] < 1:
        raise ValueError("sizes must be positive")
    window = min(window, sizes[0])
    vp = make_predictor(config, 2, np.random.default_rng(seed))
    starts = {s - window: s for s in sizes}
    lat_u, lat_p = np.zeros(window), np.zeros(window)
    report, clock = {"sizes": {}, "window": window, "budget_s": config.tau}, time.perf_counter
    active, j = None, 0
    warm_up_tree(7)
    gc_was = gc.isenabled()
    gc.disable()
    try:
        for k, (x, y) in enumerate(synthetic_stream(sizes[-1], config, seed)):
            if k in starts:
                active, j = starts[k], 0
            if active is None:
                vp.update_vector(x, y)
                continue
            t0 = clock()
            vp.update_vector(x, y)
            t1 = clock()
            vp.predict_vector(x)
            t2 = clock()
            lat_u[j], lat_p[j] = t1 - t0, t2 - t1
            j += 1
            if j == window:
                stats = latency_stats(lat_u, lat_p, config.tau).to_dict()
                stats["depth"] = max(tree.depth for tree in vp.trees)
                stats["leaves"] = sum(len(tree.leaves()) for tree in vp.trees)
                report["sizes"][str(active)] = stats
                if progress is not None:
                    progress(active, stats)
                active = None
                gc.collect()
    finally:
        if gc_was:
            gc.enable()
    means = [report["sizes"][str(s)]["total_mean"] for s in sizes]
    report["growth_ratio"] = {f"{a}->{b}": mb / ma for a, b, ma, mb in zip(sizes, sizes[1:], means, means[1:])}
    report["frac_over_budget"] = max(report["sizes"][str(s)]["frac_over_budget"] for s in sizes)
    return report


def exact_gp_baseline(n: int, config: ExperimentConfig, repeats: int = 5, seed: int = 0) -> dict:
    """Time one bordered insert plus one posterior mean on a single exact GP
    already holding ``n`` points (one output; the control loop needs two)."""
    pairs = list(synthetic_stream(n + repeats, config, seed))
    X = np.array([p[0] for p in pairs])
    y = np.array([p[1][0] for p in pairs])
    ls = np.repeat(np.asarray(config.gp.lengthscales, dtype=float), [2, 2, 2, 1])
    hp = Hyperparameters(config.gp.sigma_f, ls, config.gp.sigma_on)
    model = gp_exact.factorize(X[:n], y[:n], hp)
    times = []
    for r in range(repeats):
        t0 = time.perf_counter()
        model = gp_exact.insert_point(model, X[n + r], y[n + r])
        gp_exact.posterior_mean(model, X[n + r])
        times.append(time.perf_counter() - t0)
    return {"n": n, "per_output_s": float(np.median(times)), "per_tick_s": 2.0 * float(np.median(times)),
            "budget_s": config.tau}
