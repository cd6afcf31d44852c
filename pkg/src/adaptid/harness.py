"""Closed-loop episode runner, metrics, parameter sweep, and CSV emission.

The control loop per tick: read the (possibly noisy) positions, derive
velocity and acceleration estimates by finite differencing, update the
online learner with the previous command's realized acceleration, evaluate
the acceleration policy, compute the inverse-dynamics torque plus the
learned offset, and hold that torque across the simulator substeps.
Everything is deterministic given the config and an episode seed.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    PlantSpec,
    PolicySpec,
    SweepGrid,
    config_to_mapping,
    format_kv,
)
from .dynamics import (
    ApproxModel,
    Array,
    Plant,
    State,
    forward_dynamics,
    integrate_step,
    inverse_dynamics,
)
from .learner import (
    AccelEstimator,
    LearnerState,
    constant_offset_model,
    indirect_step,
    learner_tick,
)
from .plants import (
    make_biased_arm_pair,
    make_double_integrator_pair,
    make_perfect_model,
    make_planar_pair,
    make_stiction_plant,
    make_zero_model,
    random_initial_velocity,
)
from .policies import ChainedPolicy, PDPointPolicy, make_waypoint_lqr_policy


def build_pair(spec: PlantSpec) -> tuple[Plant, ApproxModel]:
    """Instantiate the plant/model pair described by a plant spec."""
    if spec.kind == "planar":
        plant, model = make_planar_pair()
    elif spec.kind == "biased_arm":
        plant, model = make_biased_arm_pair(spec.dof, spec.inertia, spec.damping)
    elif spec.kind == "stiction":
        plant = make_stiction_plant(spec.mass, spec.breakaway, spec.velocity_eps)
        model = make_zero_model(1)
    elif spec.kind == "double_integrator":
        plant, model = make_double_integrator_pair(spec.dof, spec.mass)
    else:
        raise ValueError(f"unknown plant kind {spec.kind!r}")
    if spec.zero_model:
        model = make_zero_model(plant.dof)
    if spec.perfect_model:
        model = make_perfect_model(plant)
    return plant, model


def build_policy(spec: PolicySpec, dof: int, dt_control: float, rng: np.random.Generator):
    """Instantiate the acceleration policy described by a policy spec."""
    if spec.kind == "pd":
        target = np.broadcast_to(np.asarray(spec.target, dtype=float), (dof,))
        return PDPointPolicy(target=target.copy(), kp=spec.kp, kd=spec.kd)
    if spec.kind == "chained_lqr":
        return make_waypoint_lqr_policy(
            rng,
            dof,
            spec.segments,
            spec.segment_duration,
            dt_control,
            q_pos=spec.q_pos,
            q_vel=spec.q_vel,
            r=spec.r,
            goal_amp=spec.goal_amp,
        )
    raise ValueError(f"unknown policy kind {spec.kind!r}")


def segment_windows(config: ExperimentConfig) -> list[tuple[float, float]]:
    """Time windows of the policy segments (one window for point policies)."""
    if config.policy.kind != "chained_lqr":
        return [(0.0, config.sim.duration)]
    edges = [config.policy.segment_duration * k for k in range(config.policy.segments + 1)]
    return [(edges[i], edges[i + 1]) for i in range(config.policy.segments)]


def inject_noise(rng: np.random.Generator, amplitude: float, value: Array) -> Array:
    """``value + amplitude * uniform(-1, 1)`` elementwise; identity at zero amplitude."""
    if amplitude < 0.0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0.0:
        return value
    return value + amplitude * rng.uniform(-1.0, 1.0, size=value.shape)


@dataclass
class EpisodeTrace:
    """Per-control-tick log of one episode.

    ``accel_error`` pairs each measured acceleration with the command that
    produced it (the previous tick's desired acceleration); row 0 has no
    such pair and is excluded from metrics via ``first_valid_row``.
    """

    t: Array
    q: Array
    qd: Array
    qdd_d: Array
    qdd_a_est: Array
    qdd_a_true: Array
    tau_id: Array
    f_offset: Array
    w: Array
    accel_error: Array
    smoothed_accel_error: Array
    success: bool
    fail_time: float | None
    fail_reason: str | None
    dt_control: float
    first_valid_row: int = 1

    @property
    def rows(self) -> int:
        return len(self.t)

    @property
    def dof(self) -> int:
        return self.q.shape[1] if self.q.ndim == 2 else 0


def run_episode(config: ExperimentConfig, episode_seed: int | None = None) -> EpisodeTrace:
    """Run one closed-loop episode.

    The policy (including any random waypoints) always derives from the
    config seed so a sweep executes one fixed movement plan; the episode
    seed drives initial velocity and injected noise.
    """
    plant, model = build_pair(config.plant)
    dof = plant.dof
    policy_rng = np.random.default_rng([config.sim.seed, 0])
    policy = build_policy(config.policy, dof, config.sim.dt_control, policy_rng)

    seed = config.sim.seed if episode_seed is None else episode_seed
    rng = np.random.default_rng([seed, 1])

    q0 = np.zeros(dof)
    if config.q0:
        q0 = np.broadcast_to(np.asarray(config.q0, dtype=float), (dof,)).copy()
    qd0 = random_initial_velocity(rng, dof, config.init_vel_amp)
    state = State(q=q0, qd=qd0, t=0.0)

    dt_c = config.sim.dt_control
    ticks = config.sim.ticks
    substeps = config.sim.substeps
    offset_model = constant_offset_model(dof)
    lstate = LearnerState.zeros(dof)
    estimator = AccelEstimator(dt_c, config.accel_smoothing)

    cols = {
        name: np.zeros((ticks, dof))
        for name in (
            "q",
            "qd",
            "qdd_d",
            "qdd_a_est",
            "qdd_a_true",
            "tau_id",
            "f_offset",
            "w",
            "accel_error",
            "smoothed_accel_error",
        )
    }
    times = np.zeros(ticks)

    f_off = np.zeros(dof)
    smoothed_err = np.zeros(dof)
    prev_qdd_d: Array | None = None
    prev_rep_state: State | None = None
    prev_tau_applied: Array | None = None
    prev_q_rep: Array | None = None
    success = True
    fail_time = None
    fail_reason = None
    n_rows = 0

    for j in range(ticks):
        t = j * dt_c

        # Controller-visible state: noisy positions, finite-differenced velocity.
        q_rep = inject_noise(rng, config.noise.position_amp, state.q)
        if prev_q_rep is None:
            v_rep = state.qd.copy()
        else:
            v_rep = (q_rep - prev_q_rep) / dt_c
        prev_q_rep = q_rep
        qdd_est, est_valid = estimator.update(v_rep)

        err = np.zeros(dof)
        if prev_qdd_d is not None and est_valid:
            err = prev_qdd_d - qdd_est
            learning = config.learner_kind != "off" and t >= config.learning_on_at
            if learning and config.learner_kind == "direct":
                lstate, f_off = learner_tick(
                    config.learner, lstate, offset_model, prev_qdd_d, qdd_est
                )
            elif learning and config.learner_kind == "indirect":
                lstate = indirect_step(
                    config.learner, lstate, model, prev_rep_state, qdd_est, prev_tau_applied
                )
                f_off = lstate.w.copy()
        s = config.error_smoothing
        smoothed_err = s * smoothed_err + (1.0 - s) * err

        rep_state = State(q=q_rep, qd=v_rep, t=t)
        qdd_d = policy.accel(t, rep_state)
        tau_id = inverse_dynamics(model, rep_state, qdd_d)
        tau_cmd = tau_id + f_off

        if np.max(np.abs(tau_cmd)) > config.safety.max_abs_torque:
            success, fail_time, fail_reason = False, t, "torque limit exceeded"
            break
        if np.max(np.abs(state.qd)) > config.safety.max_abs_velocity:
            success, fail_time, fail_reason = False, t, "velocity limit exceeded"
            break

        tau_applied = inject_noise(rng, config.noise.torque_amp, tau_cmd)

        times[j] = t
        cols["q"][j] = state.q
        cols["qd"][j] = state.qd
        cols["qdd_d"][j] = qdd_d
        cols["qdd_a_est"][j] = qdd_est
        cols["tau_id"][j] = tau_id
        cols["f_offset"][j] = f_off
        cols["w"][j] = lstate.w
        cols["accel_error"][j] = err
        cols["smoothed_accel_error"][j] = smoothed_err

        # Zero-order hold across simulator substeps.
        for k in range(substeps):
            qdd_true = forward_dynamics(plant, state, tau_applied)
            if k == 0:
                cols["qdd_a_true"][j] = qdd_true
            state = integrate_step(state, qdd_true, config.sim.dt_sim)

        n_rows = j + 1
        prev_qdd_d = qdd_d
        prev_rep_state = rep_state
        prev_tau_applied = tau_applied

    return EpisodeTrace(
        t=times[:n_rows],
        q=cols["q"][:n_rows],
        qd=cols["qd"][:n_rows],
        qdd_d=cols["qdd_d"][:n_rows],
        qdd_a_est=cols["qdd_a_est"][:n_rows],
        qdd_a_true=cols["qdd_a_true"][:n_rows],
        tau_id=cols["tau_id"][:n_rows],
        f_offset=cols["f_offset"][:n_rows],
        w=cols["w"][:n_rows],
        accel_error=cols["accel_error"][:n_rows],
        smoothed_accel_error=cols["smoothed_accel_error"][:n_rows],
        success=success,
        fail_time=fail_time,
        fail_reason=fail_reason,
        dt_control=dt_c,
    )


@dataclass
class MetricsRow:
    """Per-joint episode metrics at one hyperparameter grid point."""

    eta: float
    alpha_var: float
    gamma_mom: float
    segment: int
    mean_abs_accel_error: Array
    mean_accel_error: Array
    mean_abs_offset: Array
    success: bool
    trials: int = 1


def compute_metrics(
    trace: EpisodeTrace,
    t_start: float | None = None,
    t_end: float | None = None,
    eta: float = 0.0,
    alpha_var: float = 0.0,
    gamma_mom: float = 0.0,
    segment: int = 0,
) -> MetricsRow:
    """Per-joint mean |error|, signed error bias, and mean |offset| over a window."""
    if trace.rows == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    mask = np.ones(trace.rows, dtype=bool)
    mask[: trace.first_valid_row] = False
    if t_start is not None:
        mask &= trace.t >= t_start
    if t_end is not None:
        mask &= trace.t < t_end
    if not np.any(mask):
        nan = np.full(trace.dof, np.nan)
        return MetricsRow(eta, alpha_var, gamma_mom, segment, nan, nan.copy(), nan.copy(), trace.success)
    err = trace.accel_error[mask]
    off = trace.f_offset[mask]
    return MetricsRow(
        eta=eta,
        alpha_var=alpha_var,
        gamma_mom=gamma_mom,
        segment=segment,
        mean_abs_accel_error=np.mean(np.abs(err), axis=0),
        mean_accel_error=np.mean(err, axis=0),
        mean_abs_offset=np.mean(np.abs(off), axis=0),
        success=trace.success,
    )


def _with_learner(config: ExperimentConfig, eta: float, alpha: float, gamma: float) -> ExperimentConfig:
    from .config import _replace_frozen

    learner = replace(config.learner, eta_lr=eta, alpha_var=alpha, gamma_mom=gamma)
    return _replace_frozen(config, learner=learner)


def _run_combo(args) -> list[MetricsRow]:
    config, eta, alpha, gamma, trials = args
    combo_cfg = _with_learner(config, eta, alpha, gamma)
    windows = segment_windows(combo_cfg)
    per_segment = [[] for _ in windows]
    all_safe = True
    for trial in range(trials):
        trace = run_episode(combo_cfg, episode_seed=combo_cfg.sim.seed + 10_000 + trial)
        all_safe &= trace.success
        for si, (t0, t1) in enumerate(windows):
            per_segment[si].append(
                compute_metrics(trace, t0, t1, eta=eta, alpha_var=alpha, gamma_mom=gamma, segment=si)
            )
    rows = []
    for si, rows_si in enumerate(per_segment):
        # Trials cut short before this segment contribute NaN rows; average the rest.
        valid = [r for r in rows_si if not np.all(np.isnan(r.mean_abs_accel_error))]
        pool = valid if valid else rows_si
        rows.append(
            MetricsRow(
                eta=eta,
                alpha_var=alpha,
                gamma_mom=gamma,
                segment=si,
                mean_abs_accel_error=np.mean([r.mean_abs_accel_error for r in pool], axis=0),
                mean_accel_error=np.mean([r.mean_accel_error for r in pool], axis=0),
                mean_abs_offset=np.mean([r.mean_abs_offset for r in pool], axis=0),
                success=all_safe,
                trials=trials,
            )
        )
    return rows


def run_sweep(
    config: ExperimentConfig,
    grid: SweepGrid,
    trials: int | None = None,
    jobs: int = 1,
) -> list[MetricsRow]:
    """Run every grid combo for the configured number of trials.

    Combos are independent episodes; a parallel pool changes nothing about
    the output order or values. A combo counts as unsuccessful if any of
    its trials hit a safety limit.
    """
    trials = config.trials if trials is None else trials
    tasks = [(config, eta, alpha, gamma, trials) for eta, alpha, gamma in grid.combos()]
    if jobs > 1:
        with Pool(jobs) as pool:
            nested = pool.map(_run_combo, tasks)
    else:
        nested = [_run_combo(task) for task in tasks]
    return [row for combo_rows in nested for row in combo_rows]


@dataclass
class StictionComparison:
    """Outcome of the direct-vs-indirect learner face-off on a sticky joint."""

    direct_trace: EpisodeTrace
    indirect_trace: EpisodeTrace
    target: float
    direct_breakaway_time: float | None
    indirect_breakaway_time: float | None
    direct_final_error: float
    indirect_final_error: float
    indirect_position_change: float
    indirect_max_dw_after_settle: float

    def report_lines(self) -> list[str]:
        fmt = lambda v: "never" if v is None else f"{v:.3f} s"
        return [
            f"direct   breakaway: {fmt(self.direct_breakaway_time)}, "
            f"final |q - target| = {self.direct_final_error:.4g} rad",
            f"indirect breakaway: {fmt(self.indirect_breakaway_time)}, "
            f"final |q - target| = {self.indirect_final_error:.4g} rad",
            f"indirect |position change| = {self.indirect_position_change:.3g} rad",
            f"indirect max |dw| per tick after settling = "
            f"{self.indirect_max_dw_after_settle:.3g}",
        ]


def first_breakaway_time(trace: EpisodeTrace) -> float | None:
    """Time of the first nonzero realized acceleration, if any."""
    idx = np.flatnonzero(np.max(np.abs(trace.qdd_a_true), axis=1) > 0.0)
    return float(trace.t[idx[0]]) if idx.size else None


def compare_direct_indirect(config: ExperimentConfig) -> StictionComparison:
    """Run the same sticky-joint task with both learners and compare.

    The direct learner integrates the commanded-vs-realized acceleration
    error, so a stuck joint keeps raising the offset until it breaks away.
    The baseline fits applied torque at the observed zero acceleration; its
    residual vanishes and the offset freezes, so the joint never moves.
    """
    if config.plant.kind != "stiction":
        raise ValueError("comparison requires the stiction plant")
    from .config import _replace_frozen

    direct_cfg = _replace_frozen(config, learner_kind="direct")
    indirect_cfg = _replace_frozen(config, learner_kind="indirect")
    direct = run_episode(direct_cfg)
    indirect = run_episode(indirect_cfg)
    target = float(np.broadcast_to(np.asarray(config.policy.target, float), (1,))[0])

    dw = np.abs(np.diff(indirect.w, axis=0)).max(axis=1) if indirect.rows > 1 else np.zeros(0)
    residual_settled = dw.size > 1
    return StictionComparison(
        direct_trace=direct,
        indirect_trace=indirect,
        target=target,
        direct_breakaway_time=first_breakaway_time(direct),
        indirect_breakaway_time=first_breakaway_time(indirect),
        direct_final_error=float(abs(direct.q[-1, 0] - target)) if direct.rows else np.inf,
        indirect_final_error=float(abs(indirect.q[-1, 0] - target)) if indirect.rows else np.inf,
        indirect_position_change=float(np.max(np.abs(indirect.q[:, 0] - indirect.q[0, 0])))
        if indirect.rows
        else 0.0,
        indirect_max_dw_after_settle=float(dw[1:].max()) if residual_settled else 0.0,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def trace_to_csv(trace: EpisodeTrace, path: str | Path) -> None:
    """Write a trace as UTF-8 CSV, floats in shortest round-trip form."""
    n = trace.dof
    header = ["t"]
    vector_cols = [
        ("q", trace.q),
        ("qd", trace.qd),
        ("qdd_d", trace.qdd_d),
        ("qdd_a_est", trace.qdd_a_est),
        ("qdd_a_true", trace.qdd_a_true),
        ("tau_id", trace.tau_id),
        ("f_offset", trace.f_offset),
        ("w", trace.w),
        ("accel_error", trace.accel_error),
        ("smoothed_accel_error", trace.smoothed_accel_error),
    ]
    for name, _ in vector_cols:
        header.extend(f"{name}{i}" for i in range(n))
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for j in range(trace.rows):
                row = [_fmt(trace.t[j])]
                for _, col in vector_cols:
                    row.extend(_fmt(v) for v in col[j])
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"failed writing trace to {path}: {exc}") from exc


def read_csv_columns(path: str | Path) -> dict[str, np.ndarray]:
    """Read a CSV written by this module back into named float columns."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [row for row in reader]
    except OSError as exc:
        raise OSError(f"failed reading {path}: {exc}") from exc
    numeric = []
    for row in rows:
        numeric.append([float(v) if v not in ("", "True", "False") else v for v in row])
    cols: dict[str, list] = {name: [] for name in header}
    for row in numeric:
        for name, value in zip(header, row):
            cols[name].append(value)
    return {
        name: np.asarray(values)
        if values and not isinstance(values[0], str)
        else np.asarray(values)
        for name, values in cols.items()
    }


METRIC_NAMES = ("mean_abs_accel_error", "mean_accel_error", "mean_abs_offset")


def metrics_to_csv(rows: list[MetricsRow], path: str | Path) -> None:
    """Write sweep metrics in long format, one value per (combo, segment, joint, metric)."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["eta", "alpha_var", "gamma_mom", "segment", "joint", "metric", "value", "success"]
            )
            for row in rows:
                for metric in METRIC_NAMES:
                    values = getattr(row, metric)
                    for joint, value in enumerate(values):
                        writer.writerow(
                            [
                                _fmt(row.eta),
                                _fmt(row.alpha_var),
                                _fmt(row.gamma_mom),
                                row.segment,
                                joint,
                                metric,
                                _fmt(value),
                                int(row.success),
                            ]
                        )
    except OSError as exc:
        raise OSError(f"failed writing metrics to {path}: {exc}") from exc


def config_hash(config: ExperimentConfig, seed: int | None = None) -> str:
    """Deterministic short hash of a config (and optional seed override)."""
    text = format_kv(config_to_mapping(config))
    if seed is not None:
        text += f"episode_seed = {seed}\n"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
