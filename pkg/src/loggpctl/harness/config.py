"""Experiment configuration: nested dataclasses with a versioned JSON form.

Only the output directory may be overridden from the environment
(``LOGGPCTL_OUT_DIR``); everything else comes from the file so that a
config file fully determines a study.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..control import DEFAULT_GAINS, ControllerKind, ReferenceConfig
from ..human import CohortRanges
from ..loggp import RpropConfig
from ..validation import ConfigError

__all__ = [
    "CONFIG_SCHEMA",
    "OUT_DIR_ENV",
    "PlantConfig",
    "GPConfig",
    "NoiseConfig",
    "CohortConfig",
    "StudyConfig",
    "ExperimentConfig",
    "load_config",
    "save_config",
]

CONFIG_SCHEMA = "loggpctl.config/1"
OUT_DIR_ENV = "LOGGPCTL_OUT_DIR"


@dataclass(frozen=True)
class PlantConfig:
    """``kind`` is ``"stage"`` or ``"arm"``; unused fields are ignored by the other kind."""

    kind: str = "stage"
    masses: tuple = (6.0, 4.0)
    workspace_limit: float = 0.20
    lengths: tuple = (0.4, 0.3)
    gravity: float = 9.81

    def __post_init__(self):
        if self.kind not in ("stage", "arm"):
            raise ConfigError(f"plant.kind must be 'stage' or 'arm', got {self.kind!r}")

    def build(self):
        from ..plant import CartesianStage, TwoLinkArm

        if self.kind == "stage":
            return CartesianStage(self.masses, self.workspace_limit)
        return TwoLinkArm(self.masses, self.lengths, self.gravity)


@dataclass(frozen=True)
class GPConfig:
    """LoG-GP settings; inputs are ordered ``(q, qdot, qddot, t)``.

    ``lengthscales`` holds one value per input group (position, velocity,
    acceleration, time) and is broadcast over the ``d`` components.
    """

    rate_hz: float = 200.0
    max_points: int = 100
    overlap_ratio: float = 0.1
    sigma_f: float = 5.0
    lengthscales: tuple = (0.05, 0.1, 2.0, 20.0)
    sigma_on: float = 0.5
    adapt: bool = True
    optimize_noise: bool = True
    rprop: RpropConfig = RpropConfig()

    def __post_init__(self):
        if self.rate_hz <= 0 or self.max_points < 2 or self.overlap_ratio < 0:
            raise ConfigError("gp.rate_hz and gp.overlap_ratio must be positive, gp.max_points >= 2")
        if len(self.lengthscales) != 4 or min(self.lengthscales) <= 0:
            raise ConfigError("gp.lengthscales needs four positive group values")
        if self.sigma_f <= 0 or self.sigma_on <= 0:
            raise ConfigError("gp.sigma_f and gp.sigma_on must be positive")


@dataclass(frozen=True)
class NoiseConfig:
    enabled: bool = True
    sigma_q: float = 1e-5
    sigma_qdot: float = 1e-3


@dataclass(frozen=True)
class CohortConfig:
    size: int = 9
    master_seed: int = 20190101
    ranges: CohortRanges = CohortRanges()
    # patient the TunedPD gains stand for; None picks the median-proficiency member
    surrogate: int | None = None
    cohort_file: str | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError("cohort.size must be at least 1")
        if self.surrogate is not None and not 0 <= self.surrogate < self.size:
            raise ConfigError("cohort.surrogate must index a cohort member")


@dataclass(frozen=True)
class StudyConfig:
    training_runs: int = 1
    test_runs: int = 4
    # "test_phase": one model per patient, shared by that patient's test runs;
    # "run": fresh model every run; "patient": shared by training and test runs
    gp_persistence: str = "test_phase"
    variants: tuple = ("low", "high", "gp", "tuned")

    def __post_init__(self):
        if self.gp_persistence not in ("test_phase", "run", "patient"):
            raise ConfigError(f"unknown study.gp_persistence {self.gp_persistence!r}")
        if self.training_runs < 0 or self.test_runs < 1:
            raise ConfigError("study needs at least one test run")
        for v in self.variants:
            ControllerKind(v)


def _default_gains():
    return {k.value: [g.kp, g.kd] for k, g in DEFAULT_GAINS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantConfig = PlantConfig()
    reference: ReferenceConfig = ReferenceConfig()
    gp: GPConfig = GPConfig()
    noise: NoiseConfig = NoiseConfig()
    cohort: CohortConfig = CohortConfig()
    study: StudyConfig = StudyConfig()
    gains: dict = field(default_factory=_default_gains)
    u_max: float = 40.0
    device_rate_hz: float = 4000.0
    # start with the reference velocity (True) or at rest (False); position is always the reference start
    start_on_reference: bool = True
    output_dir: str = "out"

    def __post_init__(self):
        if self.device_rate_hz <= 0:
            raise ConfigError("device_rate_hz must be positive")
        ratio = self.device_rate_hz / self.gp.rate_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("gp.rate_hz must divide device_rate_hz")
        if self.u_max <= 0:
            raise ConfigError("u_max must be positive")
        for k in ControllerKind:
            if k.value not in self.gains:
                raise ConfigError(f"gains missing for controller {k.value!r}")

    @property
    def substeps(self) -> int:
        return int(round(self.device_rate_hz / self.gp.rate_hz))

    @property
    def dt(self) -> float:
        return 1.0 / self.device_rate_hz

    @property
    def tau(self) -> float:
        return 1.0 / self.gp.rate_hz

    @property
    def n_ticks(self) -> int:
        return int(round(self.reference.duration * self.gp.rate_hz))

    def gains_for(self, kind):
        from ..control import Gains

        kp, kd = self.gains[ControllerKind(kind).value]
        return Gains(float(kp), float(kd))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = _plain(self)
        return {"schema": CONFIG_SCHEMA, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", CONFIG_SCHEMA)
        if schema != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {schema!r} (expected {CONFIG_SCHEMA!r})")
        return _build(cls, d, "config")


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in d.items():
        default = known[name].default
        if default is dataclasses.MISSING and known[name].default_factory is not dataclasses.MISSING:
            default = known[name].default_factory()
        if dataclasses.is_dataclass(default):
            value = _build(type(default), value, f"{where}.{name}")
        elif isinstance(default, tuple) and isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path=None, env=None) -> ExperimentConfig:
    """Read a config file (or the defaults when ``path`` is None).

    A study summary JSON is accepted as well; its embedded ``config`` echo is
    used.  The ``LOGGPCTL_OUT_DIR`` environment variable, when set, replaces
    ``output_dir``.
    """
    env = os.environ if env is None else env
    if path is None:
        cfg = ExperimentConfig()
    else:
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if isinstance(payload, dict) and "config" in payload and "schema" in payload \
                and str(payload["schema"]).startswith("loggpctl.summary/"):
            payload = payload["config"]
        try:
            cfg = ExperimentConfig.from_dict(payload)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    out = env.get(OUT_DIR_ENV)
    if out:
        cfg = cfg.replace(output_dir=out)
    return cfg


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
