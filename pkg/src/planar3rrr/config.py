"""Experiment configuration: schema, validation, loading, hashing.

The config file is YAML with a fixed, versioned schema.  Unknown keys are
rejected; all values are plain scalars/lists in SI units (m, kg, N, N/m,
Nm/rad, s, rad).  Every command output embeds the sha256 of the resolved
configuration so results are traceable to their exact inputs.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .contact import DEFAULT_CONFIG_POSES, ScenarioRanges
from .control import ImpedanceGains
from .dynamics import DynamicsParams
from .kinematics import RobotGeometry
from .observer import ObserverConfig
from .reaction import ReactionPolicy
from .simulation import SimulationSettings

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class GeometrySection:
    base_points: list = field(default_factory=lambda: (
        (0.5 * np.stack([np.cos(np.deg2rad([90, 210, 330])),
                         np.sin(np.deg2rad([90, 210, 330]))], axis=1)).tolist()))
    platform_offsets: list = field(default_factory=lambda: (
        (0.1 * np.stack([np.cos(np.deg2rad([90, 210, 330])),
                         np.sin(np.deg2rad([90, 210, 330]))], axis=1)).tolist()))
    link1_lengths: list = field(default_factory=lambda: [0.3, 0.3, 0.3])
    link2_lengths: list = field(default_factory=lambda: [0.3, 0.3, 0.3])
    branch: list = field(default_factory=lambda: [1, 1, 1])


@dataclass
class DynamicsSection:
    link1_masses: list = field(default_factory=lambda: [0.8] * 3)
    link2_masses: list = field(default_factory=lambda: [0.6] * 3)
    link1_coms: list = field(default_factory=lambda: [0.15] * 3)
    link2_coms: list = field(default_factory=lambda: [0.15] * 3)
    link1_inertias: list = field(default_factory=lambda: [0.8 * 0.3**2 / 12] * 3)
    link2_inertias: list = field(default_factory=lambda: [0.6 * 0.3**2 / 12] * 3)
    platform_mass: float = 1.5
    platform_inertia: float = 0.01
    viscous: list = field(default_factory=lambda: [0.05] * 3)
    coulomb: list = field(default_factory=lambda: [0.1] * 3)
    coulomb_v_eps: float = 0.01


@dataclass
class ObserverSection:
    gains: list = field(default_factory=lambda: [20.0, 20.0, 20.0])
    thresholds: list = field(default_factory=lambda: [10.0, 10.0, 1.0])
    qd_noise_sigma: float = 0.0


@dataclass
class ImpedanceSection:
    stiffness: list = field(default_factory=lambda: [2000.0, 2000.0, 85.0])
    zeta: float = 1.0


@dataclass
class ReactionSection:
    p_th: float = 0.8
    hold_samples: int = 10
    retraction_speed: float = 0.05
    opening_rate: float = 0.2
    friction_comp: float = 0.9


@dataclass
class ScenarioSection:
    config_poses: list = field(default_factory=lambda: DEFAULT_CONFIG_POSES.tolist())
    collision_peak: list = field(default_factory=lambda: [20.0, 60.0])
    collision_duration: list = field(default_factory=lambda: [0.05, 0.15])
    collision_s: list = field(default_factory=lambda: [0.4, 1.0])
    platform_radius: float = 0.1
    body_stiffness: float = 2000.0
    clamp_stiffness: list = field(default_factory=lambda: [1500.0, 2500.0])
    clamp_clearance: float = 0.002
    press_speed: list = field(default_factory=lambda: [0.02, 0.04])
    press_depth: list = field(default_factory=lambda: [0.03, 0.06])
    press_jitter_deg: float = 25.0
    onset: float = 0.3
    repeats_dataset: int = 12
    repeats_eval: int = 40


@dataclass
class ClassifierSection:
    hidden_layers: list = field(default_factory=lambda: [1, 2])
    widths: list = field(default_factory=lambda: [8, 16, 32, 64])
    l2: list = field(default_factory=lambda: [1e-4, 1e-3, 1e-2])
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 20
    val_fraction: float = 0.1


@dataclass
class SimulationSection:
    dt: float = 1e-3
    collision_duration: float = 1.5
    clamping_duration: float = 3.0
    nominal_duration: float = 10.0
    release_force: float = 0.5
    release_hold: float = 0.2
    singularity_cond_max: float = 1e6
    dfcr_margin: float = 0.05


_SECTIONS = {
    "geometry": GeometrySection,
    "dynamics": DynamicsSection,
    "observer": ObserverSection,
    "impedance": ImpedanceSection,
    "reaction": ReactionSection,
    "scenarios": ScenarioSection,
    "classifier": ClassifierSection,
    "simulation": SimulationSection,
}


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    held_out_config: int = 2
    geometry: GeometrySection = field(default_factory=GeometrySection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    observer: ObserverSection = field(default_factory=ObserverSection)
    impedance: ImpedanceSection = field(default_factory=ImpedanceSection)
    reaction: ReactionSection = field(default_factory=ReactionSection)
    scenarios: ScenarioSection = field(default_factory=ScenarioSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)

    # -- domain object builders -------------------------------------------

    def geometry_obj(self):
        g = self.geometry
        return RobotGeometry(base_points=g.base_points,
                             platform_offsets=g.platform_offsets,
                             l1=g.link1_lengths, l2=g.link2_lengths,
                             branch=g.branch)

    def dynamics_params(self):
        return DynamicsParams(**asdict(self.dynamics))

    def observer_config(self):
        o = self.observer
        return ObserverConfig(gains=o.gains, thresholds=o.thresholds,
                              dt=self.simulation.dt,
                              qd_noise_sigma=o.qd_noise_sigma)

    def impedance_gains(self):
        return ImpedanceGains(stiffness=self.impedance.stiffness,
                              zeta=self.impedance.zeta)

    def policy(self, p_th=None):
        return ReactionPolicy(
            p_th=self.reaction.p_th if p_th is None else float(p_th),
            thresholds=self.observer.thresholds,
            hold_samples=self.reaction.hold_samples)

    def scenario_ranges(self):
        s = self.scenarios
        return ScenarioRanges(
            collision_peak=tuple(s.collision_peak),
            collision_duration=tuple(s.collision_duration),
            collision_s=tuple(s.collision_s),
            platform_radius=s.platform_radius,
            body_stiffness=s.body_stiffness,
            clamp_stiffness=tuple(s.clamp_stiffness),
            clamp_clearance=s.clamp_clearance,
            press_speed=tuple(s.press_speed),
            press_depth=tuple(s.press_depth),
            press_jitter_deg=s.press_jitter_deg,
            onset=s.onset)

    def config_poses(self):
        return np.asarray(self.scenarios.config_poses, dtype=float)

    def settings(self):
        s = self.simulation
        return SimulationSettings(
            dt=s.dt, collision_duration=s.collision_duration,
            clamping_duration=s.clamping_duration,
            nominal_duration=s.nominal_duration, release_force=s.release_force,
            release_hold=s.release_hold,
            singularity_cond_max=s.singularity_cond_max)

    def to_dict(self):
        return asdict(self)

    def hash(self):
        doc = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()


def _build_section(cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return cls(**data)


def from_dict(data):
    """Build a validated ExperimentConfig from a plain dict."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    kwargs = {"version": version,
              "seed": int(data.get("seed", 0)),
              "held_out_config": int(data.get("held_out_config", 2))}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build_section(cls, data.get(name), name)
    return ExperimentConfig(**kwargs)


def load(path=None):
    """Load a config file (or the built-in defaults when path is None)."""
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return from_dict(data)


def dump_default(path):
    """Write the fully-resolved default configuration as YAML."""
    cfg = ExperimentConfig()
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
