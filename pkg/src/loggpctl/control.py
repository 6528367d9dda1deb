"""Reference trajectory and the computed-torque + PD (+ learned feedforward) law."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .plant import PlantModel, PlantState, TwoLinkArm

__all__ = [
    "Gains",
    "ControllerKind",
    "Controller",
    "ReferenceConfig",
    "ReferencePoint",
    "ControlTerms",
    "DEFAULT_GAINS",
    "reference",
    "joint_reference",
    "ctc_torque",
    "pd_torque",
    "control_terms",
    "control_torque",
]


@dataclass(frozen=True)
class Gains:
    kp: float
    kd: float

    def __post_init__(self):
        if self.kp <= 0 or self.kd <= 0:
            raise ValueError("gains must be positive")


class ControllerKind(enum.Enum):
    LOW_GAIN = "low"
    HIGH_GAIN = "high"
    GP = "gp"
    TUNED_PD = "tuned"


DEFAULT_GAINS = {
    ControllerKind.LOW_GAIN: Gains(1.0, 0.1),
    ControllerKind.HIGH_GAIN: Gains(600.0, 60.0),
    ControllerKind.GP: Gains(1.0, 0.1),
    ControllerKind.TUNED_PD: Gains(35.0, 3.5),
}


@dataclass
class Controller:
    """A controller variant: gains, optional learned feedforward, force clamp."""

    kind: ControllerKind
    gains: Gains
    predictor: object = None
    u_max: float = 40.0

    def __post_init__(self):
        if (self.kind is ControllerKind.GP) != (self.predictor is not None):
            raise ValueError("the GP variant needs a predictor and the others must not have one")

    @classmethod
    def from_kind(cls, kind, predictor=None, gains=None, u_max=40.0) -> "Controller":
        kind = ControllerKind(kind)
        return cls(kind, gains or DEFAULT_GAINS[kind], predictor, u_max)


@dataclass(frozen=True)
class ReferenceConfig:
    """Rounded rectangle traversed counter-clockwise at constant speed."""

    half_extents: tuple = (0.15, 0.10)
    corner_radius: float = 0.05
    period: float = 10.0
    repetitions: int = 5
    centre: tuple = (0.0, 0.0)

    def __post_init__(self):
        hx, hy = self.half_extents
        if not 0 < self.corner_radius <= min(hx, hy):
            raise ValueError("corner radius must be positive and fit the rectangle")
        if self.period <= 0 or self.repetitions < 1:
            raise ValueError("period and repetitions must be positive")

    @property
    def duration(self) -> float:
        return self.period * self.repetitions

    @property
    def geometry(self) -> np.ndarray:
        hx, hy = self.half_extents
        return np.array([hx, hy, self.corner_radius, self.period, self.centre[0], self.centre[1]])


@dataclass
class ReferencePoint:
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray


def reference(t: float, config: ReferenceConfig = ReferenceConfig()) -> ReferencePoint:
    if t < 0:
        raise ValueError("reference time must be non-negative")
    out = np.empty((3, 2))
    g = config.geometry
    _kernels.rounded_rect_point(float(t), g[0], g[1], g[2], g[3], g[4], g[5], out)
    return ReferencePoint(out[0], out[1], out[2])


def joint_reference(arm: TwoLinkArm, t: float, config: ReferenceConfig) -> ReferencePoint:
    """Joint-space reference for the arm from the task-space curve (elbow down)."""
    p = reference(t, config)
    q = arm.inverse_kinematics(p.q)
    J = arm.jacobian(q)
    qd = np.linalg.solve(J, p.qdot)
    qdd = np.linalg.solve(J, p.qddot - arm.jacobian_dot(q, qd) @ qd)
    return ReferencePoint(q, qd, qdd)


def ctc_torque(model: PlantModel, q, qdot, ref: ReferencePoint) -> np.ndarray:
    """``H(q) qdd_ref + C(q, qd) qd_ref + g(q)``."""
    return model.H(q) @ ref.qddot + model.C(q, qdot) @ ref.qdot + model.g(q)


def pd_torque(e, edot, gains: Gains) -> np.ndarray:
    return -gains.kp * np.asarray(e, dtype=float) - gains.kd * np.asarray(edot, dtype=float)


@dataclass
class ControlTerms:
    ctc: np.ndarray
    pd: np.ndarray
    feedforward: np.ndarray
    u: np.ndarray  # clamped total


def control_terms(controller: Controller, model: PlantModel, state: PlantState, ref: ReferencePoint,
                  x=None, feedforward=None) -> ControlTerms:
    """All terms of the control law.

    For the GP variant the learned term is ``feedforward`` when given (a held
    value from the last learning tick) and ``predictor.predict_vector(x)``
    otherwise.
    """
    ctc = ctc_torque(model, state.q, state.qdot, ref)
    pd = pd_torque(state.q - ref.q, state.qdot - ref.qdot, controller.gains)
    if controller.kind is ControllerKind.GP:
        ff = controller.predictor.predict_vector(x) if feedforward is None else np.asarray(feedforward)
    else:
        ff = np.zeros(model.dof)
    u = np.clip(ctc + pd + ff, -controller.u_max, controller.u_max)
    return ControlTerms(ctc, pd, ff, u)


def control_torque(controller: Controller, model: PlantModel, state: PlantState, ref: ReferencePoint,
                   x=None, feedforward=None) -> np.ndarray:
    return control_terms(controller, model, state, ref, x, feedforward).u
