"""Experiment configuration: flat key-value files with dotted section names.

One ``section.key = value`` pair per line, ``#`` comments, values parsed as
bool/int/float, comma-separated float lists, or strings. The format is
deliberately minimal so configs diff cleanly and need no parser dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .dynamics import SimConfig
from .learner import LearnerParams


class ConfigError(ValueError):
    """Malformed config text or invalid parameter combination."""


def parse_kv_text(text: str) -> dict[str, object]:
    """Parse flat key-value text into a dict of typed values."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(value)
    return out


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        try:
            return [float(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad list value {text!r}") from exc
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def format_kv(pairs: dict[str, object]) -> str:
    """Serialize a flat mapping back to config text (sorted, round-trippable)."""
    lines = []
    for key in sorted(pairs):
        value = pairs[key]
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, (list, tuple, np.ndarray)):
            text = ", ".join(repr(float(x)) for x in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PlantSpec:
    """Which plant/model pair to build and its parameters."""

    kind: str = "planar"
    dof: int = 2
    inertia: tuple[float, ...] = (1.0,)
    damping: tuple[float, ...] = (0.5,)
    mass: float = 1.0
    breakaway: float = 5.0
    velocity_eps: float = 1e-3
    zero_model: bool = False
    perfect_model: bool = False

    VALID_KINDS = ("planar", "biased_arm", "stiction", "double_integrator")

    def __post_init__(self):
        if self.kind not in self.VALID_KINDS:
            raise ConfigError(f"plant.kind must be one of {self.VALID_KINDS}")


@dataclass(frozen=True)
class PolicySpec:
    """Which acceleration policy to build and its parameters."""

    kind: str = "pd"
    target: tuple[float, ...] = (1.0, 1.0)
    kp: float = 100.0
    kd: float = 10.0
    segments: int = 2
    segment_duration: float = 3.0
    q_pos: float = 100.0
    q_vel: float = 10.0
    r: float = 1.0
    goal_amp: float = 1.0

    VALID_KINDS = ("pd", "chained_lqr")

    def __post_init__(self):
        if self.kind not in self.VALID_KINDS:
            raise ConfigError(f"policy.kind must be one of {self.VALID_KINDS}")


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform noise amplitudes on reported positions and commanded torques."""

    position_amp: float = 0.0
    torque_amp: float = 0.0

    def __post_init__(self):
        if self.position_amp < 0.0 or self.torque_amp < 0.0:
            raise ConfigError("noise amplitudes must be >= 0")


@dataclass(frozen=True)
class SafetySpec:
    """Episode abort thresholds, mirroring an unsafe-movement cutoff."""

    max_abs_torque: float = 100.0
    max_abs_velocity: float = 20.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one closed-loop experiment."""

    plant: PlantSpec = PlantSpec()
    policy: PolicySpec = PolicySpec()
    learner: LearnerParams = LearnerParams(eta_lr=0.05)
    sim: SimConfig = SimConfig(dt_sim=1e-3, dt_control=1e-3, duration=5.0, seed=0)
    noise: NoiseSpec = NoiseSpec()
    safety: SafetySpec = SafetySpec()
    learner_kind: str = "direct"
    learning_on_at: float = 0.0
    trials: int = 3
    init_vel_amp: float = 0.0
    q0: tuple[float, ...] = ()
    accel_smoothing: float = 0.0
    error_smoothing: float = 0.975

    def __post_init__(self):
        if self.learner_kind not in ("direct", "indirect", "off"):
            raise ConfigError("learner kind must be direct, indirect, or off")
        if not 0.0 <= self.learning_on_at <= self.sim.duration:
            raise ConfigError("learning_on_at must lie within [0, duration]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        sim = SimConfig(
            dt_sim=self.sim.dt_sim,
            dt_control=self.sim.dt_control,
            duration=self.sim.duration,
            seed=seed,
        )
        return _replace_frozen(self, sim=sim)


def _replace_frozen(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    values.update(kwargs)
    return ExperimentConfig(**values)


def _tuple_of_floats(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(x) for x in value)


def config_from_mapping(kv: dict[str, object]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed key-value pairs."""
    kv = dict(kv)

    def take(key, default):
        return kv.pop(key, default)

    try:
        plant = PlantSpec(
            kind=str(take("plant.kind", "planar")),
            dof=int(take("plant.dof", 2)),
            inertia=_tuple_of_floats(take("plant.inertia", (1.0,))),
            damping=_tuple_of_floats(take("plant.damping", (0.5,))),
            mass=float(take("plant.mass", 1.0)),
            breakaway=float(take("plant.breakaway", 5.0)),
            velocity_eps=float(take("plant.velocity_eps", 1e-3)),
            zero_model=bool(take("plant.zero_model", False)),
            perfect_model=bool(take("plant.perfect_model", False)),
        )
        policy = PolicySpec(
            kind=str(take("policy.kind", "pd")),
            target=_tuple_of_floats(take("policy.target", (1.0, 1.0))),
            kp=float(take("policy.kp", 100.0)),
            kd=float(take("policy.kd", 10.0)),
            segments=int(take("policy.segments", 2)),
            segment_duration=float(take("policy.segment_duration", 3.0)),
            q_pos=float(take("policy.q_pos", 100.0)),
            q_vel=float(take("policy.q_vel", 10.0)),
            r=float(take("policy.r", 1.0)),
            goal_amp=float(take("policy.goal_amp", 1.0)),
        )
        learner = LearnerParams(
            eta_lr=float(take("learner.eta", 0.05)),
            lambda_reg=float(take("learner.lambda_reg", 0.0)),
            gamma_mom=float(take("learner.gamma", 0.0)),
            alpha_var=float(take("learner.alpha_var", 0.0)),
            adapt_forgetting=bool(take("learner.adapt_forgetting", False)),
            forgetting_error_scale=float(take("learner.forgetting_scale", 1.0)),
            lambda_max=float(take("learner.lambda_max", 1.0)),
            variance_decay=float(take("learner.variance_decay", 0.999)),
            use_smoother=bool(take("learner.use_smoother", False)),
        )
        sim = SimConfig(
            dt_sim=float(take("sim.dt_sim", 1e-3)),
            dt_control=float(take("sim.dt_control", 1e-3)),
            duration=float(take("sim.duration", 5.0)),
            seed=int(take("sim.seed", 0)),
        )
        noise = NoiseSpec(
            position_amp=float(take("noise.position_amp", 0.0)),
            torque_amp=float(take("noise.torque_amp", 0.0)),
        )
        safety = SafetySpec(
            max_abs_torque=float(take("safety.max_abs_torque", 100.0)),
            max_abs_velocity=float(take("safety.max_abs_velocity", 20.0)),
        )
        config = ExperimentConfig(
            plant=plant,
            policy=policy,
            learner=learner,
            sim=sim,
            noise=noise,
            safety=safety,
            learner_kind=str(take("learner.kind", "direct")),
            learning_on_at=float(take("run.learning_on_at", 0.0)),
            trials=int(take("run.trials", 3)),
            init_vel_amp=float(take("run.init_vel_amp", 0.0)),
            q0=_tuple_of_floats(take("run.q0", ())),
            accel_smoothing=float(take("learner.accel_smoothing", 0.0)),
            error_smoothing=float(take("report.error_smoothing", 0.975)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if kv:
        raise ConfigError(f"unknown config keys: {sorted(kv)}")
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file."""
    text = Path(path).read_text(encoding="utf-8")
    return config_from_mapping(parse_kv_text(text))


def config_to_mapping(cfg: ExperimentConfig) -> dict[str, object]:
    """Flatten a config back to its key-value representation."""
    return {
        "plant.kind": cfg.plant.kind,
        "plant.dof": cfg.plant.dof,
        "plant.inertia": list(cfg.plant.inertia),
        "plant.damping": list(cfg.plant.damping),
        "plant.mass": cfg.plant.mass,
        "plant.breakaway": cfg.plant.breakaway,
        "plant.velocity_eps": cfg.plant.velocity_eps,
        "plant.zero_model": cfg.plant.zero_model,
        "plant.perfect_model": cfg.plant.perfect_model,
        "policy.kind": cfg.policy.kind,
        "policy.target": list(cfg.policy.target),
        "policy.kp": cfg.policy.kp,
        "policy.kd": cfg.policy.kd,
        "policy.segments": cfg.policy.segments,
        "policy.segment_duration": cfg.policy.segment_duration,
        "policy.q_pos": cfg.policy.q_pos,
        "policy.q_vel": cfg.policy.q_vel,
        "policy.r": cfg.policy.r,
        "policy.goal_amp": cfg.policy.goal_amp,
        "learner.kind": cfg.learner_kind,
        "learner.eta": cfg.learner.eta_lr,
        "learner.lambda_reg": cfg.learner.lambda_reg,
        "learner.gamma": cfg.learner.gamma_mom,
        "learner.alpha_var": cfg.learner.alpha_var,
        "learner.adapt_forgetting": cfg.learner.adapt_forgetting,
        "learner.forgetting_scale": cfg.learner.forgetting_error_scale,
        "learner.lambda_max": cfg.learner.lambda_max,
        "learner.variance_decay": cfg.learner.variance_decay,
        "learner.use_smoother": cfg.learner.use_smoother,
        "learner.accel_smoothing": cfg.accel_smoothing,
        "sim.dt_sim": cfg.sim.dt_sim,
        "sim.dt_control": cfg.sim.dt_control,
        "sim.duration": cfg.sim.duration,
        "sim.seed": cfg.sim.seed,
        "noise.position_amp": cfg.noise.position_amp,
        "noise.torque_amp": cfg.noise.torque_amp,
        "safety.max_abs_torque": cfg.safety.max_abs_torque,
        "safety.max_abs_velocity": cfg.safety.max_abs_velocity,
        "run.learning_on_at": cfg.learning_on_at,
        "run.trials": cfg.trials,
        "run.init_vel_amp": cfg.init_vel_amp,
        "run.q0": list(cfg.q0),
        "report.error_smoothing": cfg.error_smoothing,
    }


@dataclass(frozen=True)
class SweepGrid:
    """Hyperparameter grid for the sensitivity sweep."""

    etas: tuple[float, ...]
    alphas: tuple[float, ...]
    gammas: tuple[float, ...]

    def __post_init__(self):
        if not self.etas or not self.alphas or not self.gammas:
            raise ConfigError("sweep grid axes must be nonempty")

    def combos(self):
        for eta in self.etas:
            for alpha in self.alphas:
                for gamma in self.gammas:
                    yield eta, alpha, gamma

    def __len__(self) -> int:
        return len(self.etas) * len(self.alphas) * len(self.gammas)


def default_sweep_grid() -> SweepGrid:
    """The sensitivity grid: 10 step sizes x 6 variance gains x 2 smoothings."""
    return SweepGrid(
        etas=tuple(round(0.01 * k, 10) for k in range(1, 11)),
        alphas=tuple(round(0.1 * k, 10) for k in range(0, 6)),
        gammas=(0.9, 0.95),
    )


def load_sweep_grid(path: str | Path) -> SweepGrid:
    """Read a grid file with ``eta``, ``alpha``, ``gamma`` list keys."""
    kv = parse_kv_text(Path(path).read_text(encoding="utf-8"))
    unknown = set(kv) - {"eta", "alpha", "gamma"}
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")

    def axis(key, default):
        if key not in kv:
            return default
        value = kv[key]
        return _tuple_of_floats(value)

    grid = default_sweep_grid()
    return SweepGrid(
        etas=axis("eta", grid.etas),
        alphas=axis("alpha", grid.alphas),
        gammas=axis("gamma", grid.gammas),
    )
