"""Euler-Lagrange plants ``H(q) qdd + C(q, qd) qd + g(q) + f = u``.

Two concrete models are provided: :class:`CartesianStage`, a decoupled
two-axis linear stage in the horizontal plane, and :class:`TwoLinkArm`, a
planar revolute arm under gravity.  The module also holds the fixed-step RK4
integrator and the residual-torque training targets ``y = u - u_hat(x)``.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

from .validation import NumericError

__all__ = [
    "PlantModel",
    "CartesianStage",
    "TwoLinkArm",
    "PlantState",
    "TrainingPair",
    "Sensor",
    "forward_accel",
    "inverse_dynamics",
    "step",
    "residual_sample",
    "pack_input",
    "unpack_input",
    "make_plant",
]


class PlantModel(abc.ABC):
    """Rigid-body dynamics with known ``H``, ``C`` and ``g``."""

    dof: int
    workspace_limit: np.ndarray

    @abc.abstractmethod
    def H(self, q) -> np.ndarray:
        """Symmetric positive definite inertia matrix."""

    @abc.abstractmethod
    def C(self, q, qdot) -> np.ndarray:
        """Coriolis/centrifugal matrix."""

    @abc.abstractmethod
    def g(self, q) -> np.ndarray:
        """Gravity torque."""

    def within_workspace(self, q) -> bool:
        return bool(np.all(np.abs(q) <= self.workspace_limit))

    # task-space hooks; identity for plants whose coordinates are Cartesian
    def forward_kinematics(self, q) -> np.ndarray:
        return np.asarray(q, dtype=float)

    def jacobian(self, q) -> np.ndarray:
        return np.eye(self.dof)

    def to_config(self) -> dict:
        raise NotImplementedError


class CartesianStage(PlantModel):
    """Two orthogonal linear stages: ``H = diag(masses)``, no Coriolis, no gravity."""

    def __init__(self, masses=(6.0, 4.0), workspace_limit=0.20):
        self.masses = np.asarray(masses, dtype=float)
        if np.any(self.masses <= 0):
            raise ValueError("stage masses must be positive")
        self.dof = self.masses.shape[0]
        self.workspace_limit = np.broadcast_to(
            np.asarray(workspace_limit, dtype=float), (self.dof,)
        ).copy()
        self._H = np.diag(self.masses)
        self._zero_C = np.zeros((self.dof, self.dof))
        self._zero_g = np.zeros(self.dof)

    def H(self, q):
        return self._H.copy()

    def C(self, q, qdot):
        return self._zero_C.copy()

    def g(self, q):
        return self._zero_g.copy()

    def to_config(self):
        return {"kind": "stage", "masses": self.masses.tolist(),
                "workspace_limit": self.workspace_limit.tolist()}


class TwoLinkArm(PlantModel):
    """Planar two-link revolute arm with uniform rods, gravity along ``-y``.

    ``q = (shoulder, elbow)`` in radians, elbow measured relative to link 1.
    """

    def __init__(self, masses=(2.0, 1.5), lengths=(0.4, 0.3), gravity=9.81,
                 workspace_limit=(math.pi, math.pi)):
        self.m1, self.m2 = map(float, masses)
        self.l1, self.l2 = map(float, lengths)
        self.gravity = float(gravity)
        self.dof = 2
        self.workspace_limit = np.asarray(workspace_limit, dtype=float)
        lc1, lc2 = 0.5 * self.l1, 0.5 * self.l2
        I1, I2 = self.m1 * self.l1**2 / 12.0, self.m2 * self.l2**2 / 12.0
        self._a = I1 + I2 + self.m1 * lc1**2 + self.m2 * (self.l1**2 + lc2**2)
        self._b = self.m2 * self.l1 * lc2
        self._c = I2 + self.m2 * lc2**2
        self._g1 = (self.m1 * lc1 + self.m2 * self.l1) * self.gravity
        self._g2 = self.m2 * lc2 * self.gravity

    def H(self, q):
        c2 = math.cos(q[1])
        h12 = self._c + self._b * c2
        return np.array([[self._a + 2.0 * self._b * c2, h12], [h12, self._c]])

    def C(self, q, qdot):
        h = self._b * math.sin(q[1])
        return np.array([[-h * qdot[1], -h * (qdot[0] + qdot[1])], [h * qdot[0], 0.0]])

    def g(self, q):
        c1 = math.cos(q[0])
        c12 = math.cos(q[0] + q[1])
        return np.array([self._g1 * c1 + self._g2 * c12, self._g2 * c12])

    def forward_kinematics(self, q):
        return np.array([
            self.l1 * math.cos(q[0]) + self.l2 * math.cos(q[0] + q[1]),
            self.l1 * math.sin(q[0]) + self.l2 * math.sin(q[0] + q[1]),
        ])

    def jacobian(self, q):
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
        return np.array([
            [-self.l1 * s1 - self.l2 * s12, -self.l2 * s12],
            [self.l1 * c1 + self.l2 * c12, self.l2 * c12],
        ])

    def jacobian_dot(self, q, qdot):
        c1, s1 = math.cos(q[0]), math.sin(q[0])
        c12, s12 = math.cos(q[0] + q[1]), math.sin(q[0] + q[1])
        w1, w12 = qdot[0], qdot[0] + qdot[1]
        return np.array([
            [-self.l1 * c1 * w1 - self.l2 * c12 * w12, -self.l2 * c12 * w12],
            [-self.l1 * s1 * w1 - self.l2 * s12 * w12, -self.l2 * s12 * w12],
        ])

    def inverse_kinematics(self, p, elbow_up: bool = False):
        """Joint angles reaching the planar point ``p``."""
        x, y = float(p[0]), float(p[1])
        c2 = (x * x + y * y - self.l1**2 - self.l2**2) / (2.0 * self.l1 * self.l2)
        if abs(c2) > 1.0:
            raise ValueError(f"point {p} is out of reach")
        q2 = math.acos(c2)
        if elbow_up:
            q2 = -q2
        q1 = math.atan2(y, x) - math.atan2(self.l2 * math.sin(q2), self.l1 + self.l2 * math.cos(q2))
        return np.array([q1, q2])

    def kinetic_energy(self, q, qdot):
        qdot = np.asarray(qdot, dtype=float)
        return 0.5 * float(qdot @ self.H(q) @ qdot)

    def to_config(self):
        return {"kind": "arm", "masses": [self.m1, self.m2], "lengths": [self.l1, self.l2],
                "gravity": self.gravity, "workspace_limit": self.workspace_limit.tolist()}


def make_plant(cfg: dict) -> PlantModel:
    cfg = dict(cfg)
    kind = cfg.pop("kind", "stage")
    if kind == "stage":
        return CartesianStage(**cfg)
    if kind == "arm":
        return TwoLinkArm(**cfg)
    raise ValueError(f"unknown plant kind {kind!r}")


@dataclass
class PlantState:
    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def copy(self) -> "PlantState":
        return PlantState(self.q.copy(), self.qdot.copy(), self.t)


@dataclass
class TrainingPair:
    x: np.ndarray
    y: np.ndarray


def pack_input(q, qdot, qddot, t) -> np.ndarray:
    """GP input layout ``(q, qdot, qddot, t)`` of length ``3d + 1``."""
    d = len(q)
    x = np.empty(3 * d + 1)
    x[:d] = q
    x[d:2 * d] = qdot
    x[2 * d:3 * d] = qddot
    x[-1] = t
    return x


def unpack_input(x, d: int):
    x = np.asarray(x, dtype=float)
    if x.shape != (3 * d + 1,):
        raise ValueError(f"expected an input of length {3 * d + 1}, got shape {x.shape}")
    return x[:d], x[d:2 * d], x[2 * d:3 * d], float(x[-1])


def forward_accel(model: PlantModel, state: PlantState, u, f) -> np.ndarray:
    """Solve ``H(q) qdd = u - C(q, qd) qd - g(q) - f``."""
    q, qd = state.q, state.qdot
    rhs = np.asarray(u, dtype=float) - model.C(q, qd) @ qd - model.g(q) - np.asarray(f, dtype=float)
    try:
        return np.linalg.solve(model.H(q), rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"inertia solve failed at q={q}") from exc


def inverse_dynamics(model: PlantModel, q, qdot, qddot) -> np.ndarray:
    return model.H(q) @ qddot + model.C(q, qdot) @ qdot + model.g(q)


def step(model: PlantModel, state: PlantState, u, patient_torque_fn, dt: float) -> PlantState:
    """One classical RK4 step with ``u`` held constant.

    ``patient_torque_fn(q, qdot, t)`` is evaluated at every stage.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)

    def deriv(q, v, t):
        return v, forward_accel(model, PlantState(q, v, t), u, patient_torque_fn(q, v, t))

    q0, v0, t0 = state.q, state.qdot, state.t
    k1q, k1v = deriv(q0, v0, t0)
    k2q, k2v = deriv(q0 + 0.5 * dt * k1q, v0 + 0.5 * dt * k1v, t0 + 0.5 * dt)
    k3q, k3v = deriv(q0 + 0.5 * dt * k2q, v0 + 0.5 * dt * k2v, t0 + 0.5 * dt)
    k4q, k4v = deriv(q0 + dt * k3q, v0 + dt * k3v, t0 + dt)
    q = q0 + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    v = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise NumericError("non-finite plant state")
    return PlantState(q, v, t0 + dt)


def residual_sample(u, x, model: PlantModel) -> TrainingPair:
    """Training pair ``(x, u - u_hat(x))``: the torque the robot model cannot explain."""
    q, qd, qdd, _ = unpack_input(x, model.dof)
    y = np.asarray(u, dtype=float) - inverse_dynamics(model, q, qd, qdd)
    return TrainingPair(np.asarray(x, dtype=float).copy(), y)


class Sensor:
    """Measurement emulation for GP samples.

    With ``enabled`` false the exact simulator state and acceleration pass
    through.  Otherwise Gaussian noise is added to ``q`` and ``qdot`` and the
    acceleration is estimated from the noisy velocity at the sampling period:
    central differences for training samples (available one period late) and
    backward differences for the prediction input.

    A differenced acceleration is an average over the differencing window, so
    the training target should use the command averaged over the same window.
    Callers that know it pass ``u_bar``, the mean command applied during the
    period that ends at the current sample; otherwise the sampled command is
    used.
    """

    def __init__(self, enabled=False, sigma_q=1e-5, sigma_qdot=1e-3, period=0.005, seed=None):
        self.enabled = bool(enabled)
        self.sigma_q = float(sigma_q)
        self.sigma_qdot = float(sigma_qdot)
        self.period = float(period)
        self.rng = np.random.default_rng(seed)
        self._history = []  # (t, q_meas, qdot_meas, u, u_bar) of the last two samples

    def measure(self, q, qdot, qddot_exact, t, u, u_bar=None):
        """Return ``(x_train, u_train, x_pred)``; ``x_train`` may be ``None``.

        ``u_train`` is the control that belongs to ``x_train``.
        """
        if not self.enabled:
            x = pack_input(q, qdot, qddot_exact, t)
            return x, np.asarray(u, dtype=float), x
        qm = q + self.rng.normal(0.0, self.sigma_q, size=len(q))
        vm = qdot + self.rng.normal(0.0, self.sigma_qdot, size=len(q))
        u = np.asarray(u, dtype=float).copy()
        u_bar = None if u_bar is None else np.asarray(u_bar, dtype=float).copy()
        hist = self._history
        x_train = u_train = None
        if len(hist) == 2:
            t_mid, q_mid, v_mid, u_mid, ubar_mid = hist[1]
            acc = (vm - hist[0][2]) / (2.0 * self.period)
            x_train = pack_input(q_mid, v_mid, acc, t_mid)
            u_train = u_mid if (u_bar is None or ubar_mid is None) else 0.5 * (ubar_mid + u_bar)
        if hist:
            acc_now = (vm - hist[-1][2]) / self.period
        else:
            acc_now = np.zeros(len(q))
        hist.append((t, qm, vm, u, u_bar))
        if len(hist) > 2:
            hist.pop(0)
        return x_train, u_train, pack_input(qm, vm, acc_now, t)
