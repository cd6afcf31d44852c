"""Numerical verification of two control-as-learning identities.

First: summing the gradients of a combined position/velocity/acceleration
error objective under a constant step size collapses, by telescoping, into
a PID law (integral on position error, proportional terms on position and
velocity error).

Second: the constant-step online update on acceleration error,
``tau^{t+1} = a (qdd_d^t - qdd_a^t) + retention * tau^t`` with
finite-differenced ``qdd_a``, telescopes into virtual-velocity feedback:
the noisy acceleration differences collapse into a decayed velocity average
plus a forward-integrated desired velocity. Both identities are checked
exactly, with all finite-sum boundary terms carried explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Array


@dataclass(frozen=True)
class PIDWeights:
    """Scales of the position, velocity, and acceleration error terms."""

    alpha_pid: float
    beta_pid: float
    gamma_pid: float

    def __post_init__(self):
        if min(self.alpha_pid, self.beta_pid, self.gamma_pid) < 0.0:
            raise ValueError("weights must be >= 0")
        if self.alpha_pid == self.beta_pid == self.gamma_pid == 0.0:
            raise ValueError("at least one weight must be positive")


@dataclass(frozen=True)
class VVParams:
    """Constant step size, retention factor, and tick length.

    ``alpha_gain`` is the step size; ``lambda_ret`` the retention of the old
    command, related to the regularizer by ``alpha * reg = 1 - lambda_ret``.
    """

    alpha_gain: float
    lambda_ret: float
    dt: float

    def __post_init__(self):
        if self.alpha_gain <= 0.0 or self.dt <= 0.0:
            raise ValueError("alpha_gain and dt must be > 0")
        if not 0.0 < self.lambda_ret <= 1.0:
            raise ValueError("lambda_ret must be in (0, 1]")


@dataclass(frozen=True)
class SignalLog:
    """Per-step signal sequences sharing one tick length.

    For the PID identity the log carries desired and actual chains
    (positions/velocities of length ``T+1``, accelerations of length ``T``)
    that are forward-Euler consistent, so the telescoping sums are exact.
    For the virtual-velocity analysis it carries measured velocities
    ``qd[k] = velocity at step k`` plus the pre-start velocity needed by the
    first finite difference.
    """

    dt: float
    qdd_d: Array
    qdd_a: Array | None = None
    q_d: Array | None = None
    qd_d: Array | None = None
    q_a: Array | None = None
    qd_a: Array | None = None
    qd: Array | None = None
    qd_prestart: Array | None = None

    @property
    def steps(self) -> int:
        return self.qdd_d.shape[0]

    @property
    def dof(self) -> int:
        return self.qdd_d.shape[1]


def make_tracking_log(
    rng: np.random.Generator, steps: int, dof: int, dt: float, accel_scale: float = 1.0
) -> SignalLog:
    """Random desired/actual chains with matched initial conditions.

    Positions integrate velocities and velocities integrate accelerations by
    forward Euler, which is exactly the consistency the telescoping
    collapse relies on.
    """
    qdd_d = accel_scale * rng.standard_normal((steps, dof))
    qdd_a = accel_scale * rng.standard_normal((steps, dof))
    q0 = rng.standard_normal(dof)
    qd0 = rng.standard_normal(dof)

    def chain(qdd):
        qd = np.empty((steps + 1, dof))
        q = np.empty((steps + 1, dof))
        qd[0], q[0] = qd0, q0
        for k in range(steps):
            q[k + 1] = q[k] + dt * qd[k]
            qd[k + 1] = qd[k] + dt * qdd[k]
        return q, qd

    q_d, qd_d = chain(qdd_d)
    q_a, qd_a = chain(qdd_a)
    return SignalLog(
        dt=dt, qdd_d=qdd_d, qdd_a=qdd_a, q_d=q_d, qd_d=qd_d, q_a=q_a, qd_a=qd_a
    )


def make_velocity_log(
    rng: np.random.Generator,
    steps: int,
    dof: int,
    dt: float,
    vel_scale: float = 1.0,
    accel_scale: float = 1.0,
) -> SignalLog:
    """Random measured-velocity stream with finite-differenced accelerations."""
    qd = vel_scale * rng.standard_normal((steps, dof))
    qd_prestart = vel_scale * rng.standard_normal(dof)
    qdd_d = accel_scale * rng.standard_normal((steps, dof))
    prev = np.vstack([qd_prestart, qd[:-1]])
    qdd_a = (qd - prev) / dt
    return SignalLog(dt=dt, qdd_d=qdd_d, qdd_a=qdd_a, qd=qd, qd_prestart=qd_prestart)


def _require(log: SignalLog, *names: str) -> None:
    for name in names:
        if getattr(log, name) is None:
            raise ValueError(f"log is missing required signal {name!r}")


def _check_matched_start(log: SignalLog) -> None:
    if not np.array_equal(log.q_d[0], log.q_a[0]) or not np.array_equal(
        log.qd_d[0], log.qd_a[0]
    ):
        raise ValueError("collapse requires matched initial position and velocity")


def pid_term_gradients(weights: PIDWeights, log: SignalLog, t: int) -> Array:
    """Combined objective gradient at step ``t`` for the identity offset model.

    ``-(alpha (q_d - q_a) + beta (qd_d - qd_a) + gamma (qdd_d - qdd_a))``.
    """
    _require(log, "q_d", "q_a", "qd_d", "qd_a", "qdd_a")
    if not 0 <= t < log.steps:
        raise IndexError(f"step {t} outside log of length {log.steps}")
    return -(
        weights.alpha_pid * (log.q_d[t] - log.q_a[t])
        + weights.beta_pid * (log.qd_d[t] - log.qd_a[t])
        + weights.gamma_pid * (log.qdd_d[t] - log.qdd_a[t])
    )


def gd_pid_torque(weights: PIDWeights, log: SignalLog, t: int) -> Array:
    """Torque after ``t`` constant-step gradient steps (the summed form)."""
    _check_matched_start(log)
    total = np.zeros(log.dof)
    for k in range(t):
        total -= log.dt * pid_term_gradients(weights, log, k)
    return total


def collapsed_pid_torque(weights: PIDWeights, log: SignalLog, t: int) -> Array:
    """The telescoped PID form: integral + position error + velocity error."""
    _require(log, "q_d", "q_a", "qd_d", "qd_a")
    _check_matched_start(log)
    integral = log.dt * (log.q_d[:t] - log.q_a[:t]).sum(axis=0)
    return (
        weights.alpha_pid * integral
        + weights.beta_pid * (log.q_d[t] - log.q_a[t])
        + weights.gamma_pid * (log.qd_d[t] - log.qd_a[t])
    )


def recursive_tau(params: VVParams, log: SignalLog) -> Array:
    """Run the constant-step recursion; entry ``t`` holds the command ``tau^t``.

    ``tau^{t+1} = alpha (qdd_d^t - qdd_a^t) + lambda_ret tau^t`` with
    ``tau^0 = 0``.
    """
    _require(log, "qdd_a")
    taus = np.zeros((log.steps + 1, log.dof))
    for t in range(log.steps):
        taus[t + 1] = (
            params.alpha_gain * (log.qdd_d[t] - log.qdd_a[t])
            + params.lambda_ret * taus[t]
        )
    return taus


def classical_vv_tau(params: VVParams, log: SignalLog) -> tuple[Array, Array]:
    """Classical virtual-velocity controller; returns ``(tau, v)`` histories.

    ``v^{t+1} = (lam v^t + (1-lam) qd^t) + dt qdd_d^t`` with ``v^0 = qd^0``
    and ``tau^{t+1} = alpha (v^{t+1} - qd^t)``.
    """
    _require(log, "qd")
    lam = params.lambda_ret
    v = np.zeros((log.steps + 1, log.dof))
    taus = np.zeros((log.steps + 1, log.dof))
    v[0] = log.qd[0]
    for t in range(log.steps):
        v[t + 1] = lam * v[t] + (1.0 - lam) * log.qd[t] + params.dt * log.qdd_d[t]
        taus[t + 1] = params.alpha_gain * (v[t + 1] - log.qd[t])
    return taus, v


@dataclass(frozen=True)
class VVExpansion:
    """Direct-summation expansion of one command, with explicit boundary terms.

    ``vel_sum`` is the decayed average of measured velocities, ``acc_sum``
    the decayed forward integration of desired accelerations; ``v_virtual``
    their sum (the virtual velocity). ``boundary`` collects the finite-sum
    residual terms, and ``tau`` is the fully reconstructed command.
    """

    vel_sum: Array
    acc_sum: Array
    v_virtual: Array
    boundary: Array
    tau: Array


def expand_online_vv(params: VVParams, log: SignalLog, t: int) -> VVExpansion:
    """Expansion of ``tau^{t+1}`` from the online recursion.

    With weights ``w_k = (1-lam) lam^k``:
    ``v_virtual = sum_{k<t} w_k qd^{t-k-1} + sum_{k<=t} lam^k dt qdd_d^{t-k}``
    and exactly
    ``tau^{t+1} = (alpha/dt) (v_virtual - qd^t + lam^t qd^{-1})``.
    """
    _require(log, "qd", "qd_prestart")
    if not 0 <= t < log.steps:
        raise IndexError(f"step {t} outside log of length {log.steps}")
    lam = params.lambda_ret
    vel_sum = np.zeros(log.dof)
    for k in range(t):
        vel_sum += (1.0 - lam) * lam**k * log.qd[t - k - 1]
    acc_sum = np.zeros(log.dof)
    for k in range(t + 1):
        acc_sum += lam**k * params.dt * log.qdd_d[t - k]
    v_virtual = vel_sum + acc_sum
    boundary = lam**t * log.qd_prestart
    tau = (params.alpha_gain / params.dt) * (v_virtual - log.qd[t] + boundary)
    return VVExpansion(
        vel_sum=vel_sum, acc_sum=acc_sum, v_virtual=v_virtual, boundary=boundary, tau=tau
    )


def expand_classical_vv(params: VVParams, log: SignalLog, t: int) -> VVExpansion:
    """Expansion of the classical rule's virtual velocity ``v^{t+1}``.

    ``v^{t+1} = sum_{k<=t} w_k qd^{t-k} + sum_{k<=t} lam^k dt qdd_d^{t-k}
    + lam^{t+1} v^0`` with ``v^0 = qd^0`` tracked explicitly in ``boundary``.
    """
    _require(log, "qd")
    if not 0 <= t < log.steps:
        raise IndexError(f"step {t} outside log of length {log.steps}")
    lam = params.lambda_ret
    vel_sum = np.zeros(log.dof)
    for k in range(t + 1):
        vel_sum += (1.0 - lam) * lam**k * log.qd[t - k]
    acc_sum = np.zeros(log.dof)
    for k in range(t + 1):
        acc_sum += lam**k * params.dt * log.qdd_d[t - k]
    boundary = lam ** (t + 1) * log.qd[0]
    v_virtual = vel_sum + acc_sum + boundary
    tau = params.alpha_gain * (v_virtual - log.qd[t])
    return VVExpansion(
        vel_sum=vel_sum, acc_sum=acc_sum, v_virtual=v_virtual, boundary=boundary, tau=tau
    )


def _rel_err(a: Array, b: Array) -> float:
    denom = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / denom


def verify_pid_identity(
    n_logs: int = 100, steps: int = 1000, dof: int = 2, seed: int = 0
) -> float:
    """Max relative residual between summed-gradient and collapsed PID torque."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_logs):
        dt = float(rng.uniform(0.001, 0.01))
        weights = PIDWeights(*rng.uniform(0.1, 3.0, 3))
        log = make_tracking_log(rng, steps, dof, dt)
        t = steps
        summed = gd_pid_torque(weights, log, t)
        collapsed = collapsed_pid_torque(weights, log, t)
        worst = max(worst, _rel_err(summed, collapsed))
    return worst


def verify_online_expansion(
    n_logs: int = 20, steps: int = 500, dof: int = 2, seed: int = 1
) -> float:
    """Max relative residual between the recursion and its expansion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_logs):
        params = VVParams(
            alpha_gain=float(rng.uniform(0.1, 2.0)),
            lambda_ret=float(rng.uniform(0.5, 0.999)),
            dt=float(rng.uniform(0.001, 0.01)),
        )
        log = make_velocity_log(rng, steps, dof, params.dt)
        taus = recursive_tau(params, log)
        for t in (0, 1, steps // 2, steps - 1):
            exp = expand_online_vv(params, log, t)
            worst = max(worst, _rel_err(exp.tau, taus[t + 1]))
    return worst


def verify_classical_expansion(
    n_logs: int = 20, steps: int = 500, dof: int = 2, seed: int = 2
) -> float:
    """Max relative residual between the classical recursion and its expansion."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_logs):
        params = VVParams(
            alpha_gain=float(rng.uniform(0.1, 2.0)),
            lambda_ret=float(rng.uniform(0.5, 0.999)),
            dt=float(rng.uniform(0.001, 0.01)),
        )
        log = make_velocity_log(rng, steps, dof, params.dt)
        taus, vs = classical_vv_tau(params, log)
        for t in (0, 1, steps // 2, steps - 1):
            exp = expand_classical_vv(params, log, t)
            worst = max(worst, _rel_err(exp.v_virtual, vs[t + 1]))
            worst = max(worst, _rel_err(exp.tau, taus[t + 1]))
    return worst


def verify_index_shift(
    n_logs: int = 20, steps: int = 300, dof: int = 2, seed: int = 3
) -> float:
    """The two expansions' velocity averages differ by a one-step index shift.

    Delaying the velocity stream by one step turns the classical velocity
    average into the online one (plus the pre-start boundary term); checked
    as an exact identity.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_logs):
        params = VVParams(
            alpha_gain=1.0,
            lambda_ret=float(rng.uniform(0.5, 0.99)),
            dt=float(rng.uniform(0.001, 0.01)),
        )
        log = make_velocity_log(rng, steps, dof, params.dt)
        shifted = SignalLog(
            dt=log.dt,
            qdd_d=log.qdd_d,
            qdd_a=log.qdd_a,
            qd=np.vstack([log.qd_prestart, log.qd[:-1]]),
            qd_prestart=log.qd_prestart,
        )
        lam = params.lambda_ret
        for t in (1, steps // 2, steps - 1):
            online = expand_online_vv(params, log, t)
            classical_shifted = expand_classical_vv(params, shifted, t)
            expected = online.vel_sum + (1.0 - lam) * lam**t * log.qd_prestart
            worst = max(worst, _rel_err(classical_shifted.vel_sum, expected))
    return worst


def noise_response_slope(
    params: VVParams,
    noise_levels=(1e-4, 1e-3, 1e-2),
    steps: int = 400,
    dof: int = 1,
    trials: int = 64,
    seed: int = 4,
) -> float:
    """Empirical slope of command standard deviation versus velocity noise.

    White noise on measured velocities drives the finite-differenced
    accelerations; because those differences telescope inside the recursion,
    the command inherits roughly one velocity-noise term rather than the
    accumulated acceleration noise.
    """
    rng = np.random.default_rng(seed)
    base = make_velocity_log(rng, steps, dof, params.dt)
    clean = recursive_tau(params, base)[-1]
    stds = []
    for sigma in noise_levels:
        finals = np.empty((trials, dof))
        for i in range(trials):
            noisy_qd = base.qd + sigma * rng.standard_normal(base.qd.shape)
            noisy_pre = base.qd_prestart + sigma * rng.standard_normal(dof)
            prev = np.vstack([noisy_pre, noisy_qd[:-1]])
            noisy = SignalLog(
                dt=base.dt,
                qdd_d=base.qdd_d,
                qdd_a=(noisy_qd - prev) / base.dt,
                qd=noisy_qd,
                qd_prestart=noisy_pre,
            )
            finals[i] = recursive_tau(params, noisy)[-1] - clean
        stds.append(float(np.std(finals)))
    levels = np.asarray(noise_levels)
    slope, _ = np.polyfit(levels, np.asarray(stds), 1)
    return float(slope)


def run_verification(seed: int = 0) -> tuple[list[str], bool]:
    """Run every identity check; returns report lines and an overall verdict."""
    checks = []
    r = verify_pid_identity(seed=seed)
    checks.append(("pid summed-vs-collapsed (tol 1e-10)", r, r <= 1e-10))
    r = verify_online_expansion(seed=seed + 1)
    checks.append(("online recursion vs expansion (tol 1e-9)", r, r <= 1e-9))
    r = verify_classical_expansion(seed=seed + 2)
    checks.append(("classical recursion vs expansion (tol 1e-12)", r, r <= 1e-12))
    r = verify_index_shift(seed=seed + 3)
    checks.append(("one-step velocity index shift (tol 1e-12)", r, r <= 1e-12))
    params = VVParams(alpha_gain=0.5, lambda_ret=0.9, dt=1.0)
    slope = noise_response_slope(params, seed=seed + 4)
    bound = 2.0 * params.alpha_gain
    checks.append((f"noise response slope <= 2*alpha ({bound:g})", slope, slope <= bound))
    lines = []
    all_ok = True
    for name, value, ok in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: max residual {value:.3e}")
        all_ok &= ok
    return lines, all_ok
