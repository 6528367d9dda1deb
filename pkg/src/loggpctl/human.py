"""Synthetic patients: impedance-like tracking of a misperceived target.

The patient pulls the handle towards where they believe the target is, with
stiffness ``K_h`` and damping ``D_h`` that decay with fatigue, plus a small
band-limited tremor.  With angle-only visual feedback the patient gets the
direction from the workspace centre right but misjudges the radius; the bias
grows as proficiency drops.

:func:`patient_torque` returns the load ``f`` as it appears in the equation of
motion, i.e. minus the force the patient applies to the handle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels

__all__ = [
    "PatientParams",
    "CohortRanges",
    "patient_torque",
    "sample_cohort",
    "save_cohort",
    "load_cohort",
]

TREMOR_COMPONENTS = 3
TREMOR_BAND_HZ = (3.0, 7.0)


@dataclass(frozen=True)
class PatientParams:
    """One synthetic patient.

    ``stiffness`` and ``damping`` are the diagonals of ``K_h`` (N/m) and
    ``D_h`` (N s/m).  ``perception_gain`` scales the radial misjudgement,
    ``fatigue_timescale`` is in seconds and ``tremor_amplitude`` in newtons.
    """

    stiffness: tuple
    damping: tuple
    proficiency: float
    perception_gain: float
    fatigue_timescale: float
    tremor_amplitude: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "stiffness", tuple(float(v) for v in self.stiffness))
        object.__setattr__(self, "damping", tuple(float(v) for v in self.damping))
        if len(self.stiffness) != len(self.damping):
            raise ValueError("stiffness and damping must have the same length")
        if min(self.stiffness) < 0 or min(self.damping) < 0:
            raise ValueError("stiffness and damping must be non-negative")
        if not 0.0 <= self.proficiency <= 1.0:
            raise ValueError("proficiency must lie in [0, 1]")
        if self.fatigue_timescale <= 0:
            raise ValueError("fatigue_timescale must be positive")
        if self.tremor_amplitude < 0:
            raise ValueError("tremor_amplitude must be non-negative")

    @property
    def dof(self) -> int:
        return len(self.stiffness)

    @property
    def radial_bias(self) -> float:
        """Relative over-estimate of the target radius."""
        return (1.0 - self.proficiency) * self.perception_gain

    @cached_property
    def tremor_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-axis sinusoid amplitudes, frequencies (Hz) and phases drawn from ``seed``."""
        rng = np.random.default_rng(self.seed)
        shape = (self.dof, TREMOR_COMPONENTS)
        freq = rng.uniform(*TREMOR_BAND_HZ, size=shape)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        w = rng.uniform(0.5, 1.0, size=shape)
        amp = self.tremor_amplitude * w / w.sum(axis=1, keepdims=True)
        return amp, freq, phase

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.stiffness), np.array(self.damping)

    def with_seed(self, seed: int) -> "PatientParams":
        """Same patient, different tremor realisation."""
        kwargs = {f.name: getattr(self, f.name) for f in fields(self)}
        kwargs["seed"] = int(seed)
        return PatientParams(**kwargs)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "PatientParams":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def patient_torque(params: PatientParams, x, reference_at_t, kinematics=None, centre=None) -> np.ndarray:
    """Load ``f_i(x)`` exerted by the patient, in the plant's coordinates.

    ``x`` is the GP input ``(q, qdot, qddot, t)``; ``reference_at_t`` is the
    task-space :class:`~loggpctl.control.ReferencePoint` (or a bare target
    position) at time ``t``.  For plants whose coordinates are not Cartesian,
    pass the plant as ``kinematics``: the force is then computed at the
    end-effector and mapped back through the Jacobian transpose.
    """
    x = np.asarray(x, dtype=float)
    d = params.dof
    q, qd, t = x[:d], x[d:2 * d], float(x[-1])
    p_ref = np.asarray(getattr(reference_at_t, "q", reference_at_t), dtype=float)
    if kinematics is None:
        p, pd, J = q, qd, None
    else:
        J = kinematics.jacobian(q)
        p, pd = kinematics.forward_kinematics(q), J @ qd
    centre = np.zeros(d) if centre is None else np.asarray(centre, dtype=float)
    return _task_load(params, p, pd, t, p_ref, centre, J)


def _task_load(params, p, pd, t, p_ref, centre, J=None):
    stiff, damp = params.arrays
    amp, freq, phase = params.tremor_table
    out = np.empty(params.dof)
    _kernels.patient_force(np.ascontiguousarray(p, dtype=float), np.ascontiguousarray(pd, dtype=float),
                           t, p_ref, centre, stiff, damp, params.radial_bias,
                           params.fatigue_timescale, amp, freq, phase, out)
    return out if J is None else J.T @ out


@dataclass(frozen=True)
class CohortRanges:
    stiffness: tuple = (20.0, 200.0)
    damping: tuple = (1.0, 20.0)
    proficiency: tuple = (0.2, 0.95)
    fatigue_timescale: tuple = (60.0, 600.0)
    tremor_amplitude: tuple = (0.0, 0.5)
    perception_gain: float = 0.6


def sample_cohort(n: int, master_seed: int, dof: int = 2, ranges: CohortRanges = CohortRanges()) -> list[PatientParams]:
    """Draw ``n`` patients uniformly from ``ranges``, deterministically in ``master_seed``."""
    if n < 1:
        raise ValueError("cohort size must be at least 1")
    rng = np.random.default_rng(master_seed)
    cohort = []
    for _ in range(n):
        cohort.append(PatientParams(
            stiffness=tuple(rng.uniform(*ranges.stiffness, size=dof)),
            damping=tuple(rng.uniform(*ranges.damping, size=dof)),
            proficiency=float(rng.uniform(*ranges.proficiency)),
            perception_gain=ranges.perception_gain,
            fatigue_timescale=float(rng.uniform(*ranges.fatigue_timescale)),
            tremor_amplitude=float(rng.uniform(*ranges.tremor_amplitude)),
            seed=int(rng.integers(2**31 - 1)),
        ))
    return cohort


def save_cohort(cohort, path) -> None:
    payload = {"schema": "loggpctl.cohort/1", "patients": [p.to_dict() for p in cohort]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_cohort(path) -> list[PatientParams]:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != "loggpctl.cohort/1":
        raise ValueError(f"{path}: not a cohort file (schema {payload.get('schema')!r})")
    return [PatientParams.from_dict(d) for d in payload["patients"]]
