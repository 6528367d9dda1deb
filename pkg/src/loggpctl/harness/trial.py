"""One closed-loop trial: plant at the device rate, learning at the GP rate.

At every GP tick ``t_k = k * tau`` the loop

1. samples ``x`` and the control ``u`` currently commanded,
2. forms the residual training pair ``y = u - u_hat(x)``,
3. inserts it into the predictor (GP variant),
4. predicts the feedforward for the next control period (GP variant),
5. integrates the plant over ``tau`` with CTC and PD recomputed at every
   device step and the learned term held constant.

The sampled ``qddot`` is the acceleration produced by the control commanded
just before the new feedforward takes effect, so in a noiseless run the
residual equals the patient load to rounding error.
"""
from __future__ import annotations

import gc
import time
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..control import Controller, ControllerKind, joint_reference, reference, control_terms
from ..gp_exact import Hyperparameters
from ..human import PatientParams, patient_torque
from ..loggp import VectorPredictor
from ..loggp import warm_up as warm_up_tree
from ..plant import (
    CartesianStage,
    PlantState,
    Sensor,
    TwoLinkArm,
    forward_accel,
    residual_sample,
    step,
)
from ..validation import NumericError
from .config import ExperimentConfig

__all__ = ["RunLog", "run_trial", "make_predictor", "trial_seeds"]


@dataclass
class RunLog:
    """Per-GP-tick records of a trial.

    Arrays have one row per completed tick.  ``q`` and friends are in plant
    coordinates, ``p``/``p_ref`` in task space (identical for the stage).
    ``u`` is the command applied after the tick (with the new feedforward);
    ``u_ctc``, ``u_pd`` and ``u_ff`` are its unclamped terms.  ``y`` is the
    residual target formed at the tick (NaN while the noisy acceleration
    estimate is not yet available) and ``f`` the true patient load at the
    sampled state.  Latencies are in seconds, NaN for variants without a
    predictor.
    """

    kind: str
    patient: int
    seed: int
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    q_ref: np.ndarray
    p: np.ndarray
    p_ref: np.ndarray
    u: np.ndarray
    u_ctc: np.ndarray
    u_pd: np.ndarray
    u_ff: np.ndarray
    y: np.ndarray
    f: np.ndarray
    lat_update: np.ndarray
    lat_predict: np.ndarray
    failed: bool = False
    failure_time: float = float("nan")
    failure_reason: str = ""
    n_samples: int = 0
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    @classmethod
    def allocate(cls, kind, patient, seed, n, d):
        vec = lambda: np.full((n, d), np.nan)  # noqa: E731
        return cls(kind, patient, seed, np.full(n, np.nan), vec(), vec(), vec(), vec(), vec(), vec(),
                   vec(), vec(), vec(), vec(), vec(), vec(), np.full(n, np.nan), np.full(n, np.nan))

    def truncate(self, n: int) -> None:
        for name in ("t", "q", "qdot", "qddot", "q_ref", "p", "p_ref", "u", "u_ctc", "u_pd", "u_ff",
                     "y", "f", "lat_update", "lat_predict"):
            setattr(self, name, getattr(self, name)[:n])


def trial_seeds(seed: int, patient: PatientParams):
    """Independent child seeds for tremor, sensor noise and the predictor."""
    ss = np.random.SeedSequence([int(seed), int(patient.seed)])
    tremor, sensor, gp = ss.spawn(3)
    return (int(tremor.generate_state(1)[0]), np.random.default_rng(sensor), np.random.default_rng(gp))


def make_predictor(config: ExperimentConfig, dof: int, seed=None) -> VectorPredictor:
    g = config.gp
    ls = np.repeat(np.asarray(g.lengthscales, dtype=float), [dof, dof, dof, 1])
    hp = Hyperparameters(g.sigma_f, ls, g.sigma_on)
    return VectorPredictor.create(
        dof, 3 * dof + 1, seed=seed, init_hyper=hp, max_points=g.max_points,
        overlap_ratio=g.overlap_ratio, adapt=g.adapt, optimize_noise=g.optimize_noise, rprop=g.rprop,
    )


class _Loop:
    """Shared per-tick logic; subclasses differ in how they integrate."""

    def __init__(self, config, plant, controller, patient, sensor):
        self.cfg = config
        self.plant = plant
        self.ctl = controller
        self.patient = patient
        self.sensor = sensor
        self.rcfg = config.reference
        self.centre = np.asarray(self.rcfg.centre, dtype=float)
        self.arm = isinstance(plant, TwoLinkArm)

    def ref(self, t):
        if self.arm:
            return joint_reference(self.plant, t, self.rcfg)
        return reference(t, self.rcfg)

    def load(self, q, qd, t):
        ref_task = reference(t, self.rcfg)
        x = np.concatenate([q, qd, np.zeros_like(q), [t]])
        return patient_torque(self.patient, x, ref_task, kinematics=self.plant if self.arm else None,
                              centre=self.centre)


class _GenericLoop(_Loop):
    def advance(self, state: PlantState, ff, n_sub, dt, u_sum):
        fn = self.load
        t0 = state.t
        for n in range(n_sub):
            ref = self.ref(state.t)
            u = control_terms(self.ctl, self.plant, state, ref, feedforward=ff).u
            u_sum += u
            state = step(self.plant, state, u, fn, dt)
            state.t = t0 + (n + 1) * dt
            if not self.plant.within_workspace(state.q):
                return state, True
        return state, False


class _StageLoop(_Loop):
    def __init__(self, *args):
        super().__init__(*args)
        p = self.patient
        stiff, damp = p.arrays
        amp, freq, phase = p.tremor_table
        g = self.ctl.gains
        self.args = (self.plant.masses, g.kp, g.kd, float(self.ctl.u_max), self.plant.workspace_limit,
                     self.rcfg.geometry, self.centre, stiff, damp, p.radial_bias, p.fatigue_timescale,
                     amp, freq, phase)

    def advance(self, state: PlantState, ff, n_sub, dt, u_sum):
        (masses, kp, kd, u_max, limit, geom, centre, stiff, damp, bias, fat_t, amp, freq, phase) = self.args
        q, qd = state.q.copy(), state.qdot.copy()
        t, failed = _kernels.stage_advance(q, qd, state.t, n_sub, dt, masses, np.asarray(ff, dtype=float),
                                           kp, kd, u_max, limit, geom, centre, stiff, damp, bias, fat_t,
                                           amp, freq, phase, u_sum)
        return PlantState(q, qd, t), bool(failed)


def run_trial(config: ExperimentConfig, kind, patient: PatientParams, seed: int, *,
              predictor: VectorPredictor | None = None, patient_index: int = -1,
              fast: bool | None = None, n_ticks: int | None = None) -> RunLog:
    """Simulate one run and return its log.

    ``predictor`` lets a GP model persist across runs; when omitted a GP
    run starts from an empty model seeded from ``seed``.  ``fast`` selects
    the compiled Cartesian-stage integrator (default: whenever the plant is
    a stage); the generic path integrates any plant in Python.
    """
    kind = ControllerKind(kind)
    plant = config.plant.build()
    d = plant.dof
    tremor_seed, sensor_rng, gp_rng = trial_seeds(seed, patient)
    patient = patient.with_seed(tremor_seed)
    if kind is ControllerKind.GP and predictor is None:
        predictor = make_predictor(config, d, gp_rng)
    controller = Controller(kind, config.gains_for(kind), predictor if kind is ControllerKind.GP else None,
                            config.u_max)
    sensor = Sensor(config.noise.enabled, config.noise.sigma_q, config.noise.sigma_qdot, config.tau, sensor_rng)
    if fast is None:
        fast = isinstance(plant, CartesianStage)
    if fast and not isinstance(plant, CartesianStage):
        raise ValueError("the compiled integrator only handles the Cartesian stage")
    loop = (_StageLoop if fast else _GenericLoop)(config, plant, controller, patient, sensor)

    n = config.n_ticks if n_ticks is None else int(n_ticks)
    log = RunLog.allocate(kind.value, patient_index, int(seed), n, d)
    ref0 = loop.ref(0.0)
    qd0 = ref0.qdot.copy() if config.start_on_reference else np.zeros(d)
    state = PlantState(ref0.q.copy(), qd0, 0.0)
    ff = np.zeros(d)
    u_sum = np.zeros(d)
    u_bar = None
    tau, dt, n_sub = config.tau, config.dt, config.substeps
    is_gp = kind is ControllerKind.GP
    clock = time.perf_counter
    done = 0
    gc_was_enabled = gc.isenabled()
    if is_gp:
        warm_up_tree(3 * d + 1)
        gc.collect()
        gc.disable()
    try:
        for k in range(n):
            t = k * tau
            state.t = t
            ref = loop.ref(t)
            # (1) sample
            sample_terms = control_terms(controller, plant, state, ref, feedforward=ff)
            u_now = sample_terms.u
            f = loop.load(state.q, state.qdot, t)
            qdd = forward_accel(plant, state, u_now, f)
            x_train, u_train, x_pred = sensor.measure(state.q, state.qdot, qdd, t, u_now, u_bar)
            # (2) residual
            y = None
            if x_train is not None:
                y = residual_sample(u_train, x_train, plant).y
            # (3) update, (4) predict
            if is_gp:
                t0 = clock()
                if y is not None:
                    predictor.update_vector(x_train, y)
                t1 = clock()
                ff = predictor.predict_vector(x_pred)
                t2 = clock()
                log.lat_update[k] = t1 - t0
                log.lat_predict[k] = t2 - t1
            # (5) control with the held feedforward
            terms = control_terms(controller, plant, state, ref, feedforward=ff)
            log.t[k] = t
            log.q[k] = state.q
            log.qdot[k] = state.qdot
            log.qddot[k] = qdd
            log.q_ref[k] = ref.q
            if loop.arm:
                log.p[k] = plant.forward_kinematics(state.q)
                log.p_ref[k] = reference(t, config.reference).q
            else:
                log.p[k] = state.q
                log.p_ref[k] = ref.q
            log.u[k] = terms.u
            log.u_ctc[k] = terms.ctc
            log.u_pd[k] = terms.pd
            log.u_ff[k] = terms.feedforward
            if y is not None:
                log.y[k] = y
            log.f[k] = f
            done = k + 1
            u_sum[:] = 0.0
            state, failed = loop.advance(state, ff, n_sub, dt, u_sum)
            u_bar = u_sum / n_sub
            if failed:
                log.failed = True
                log.failure_time = float(state.t)
                log.failure_reason = "workspace" if np.all(np.isfinite(state.q)) else "numeric"
                break
    except NumericError as exc:
        log.failed = True
        log.failure_time = float(state.t)
        log.failure_reason = f"numeric: {exc}"
    finally:
        if is_gp and gc_was_enabled:
            gc.enable()
    log.truncate(done)
    if is_gp:
        log.n_samples = len(predictor.trees[0])
        log.extra["sigma_f_max"] = max(float(leaf.model.hyper.sigma_f)
                                       for tree in predictor.trees for leaf in tree.leaves())
    return log
