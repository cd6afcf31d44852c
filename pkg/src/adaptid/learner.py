"""Online learning of inverse-dynamics torque offsets.

The learner tunes an additive torque correction so that the acceleration
actually realized on the plant matches the commanded one. The loss is the
true-inertia-weighted acceleration error, which cannot be evaluated without
the true dynamics, but its gradient reduces to the measurable acceleration
error pushed through the offset function's Jacobian. Update-rule variants:
plain gradient descent with a forgetting regularizer, momentum, its
exponential-smoother twin, per-dimension variance scaling, and adaptive
forgetting driven by the error magnitude. A torque-space baseline trained at
the observed (not commanded) acceleration is included for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .dynamics import (
    ApproxModel,
    Array,
    Plant,
    State,
    actual_acceleration,
    as_joint_vec,
)

CONSTANT = "constant"
TASK_STACKED = "task_stacked"


@dataclass(frozen=True)
class OffsetModel:
    """Structure of the learned torque offset ``f_offset(w)``.

    ``constant``: the offset is the parameter vector itself, Jacobian ``I``.
    ``task_stacked``: the offset is ``sum_i J_i(state)^T lam_i`` with the
    hypothesized task forces ``lam_i`` stacked in ``w``; each provider maps a
    state to its ``(task_dim_i, dof)`` task-map Jacobian.
    """

    kind: str
    dof: int
    task_jacobians: tuple[Callable[[State], Array], ...] = ()
    task_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONSTANT, TASK_STACKED):
            raise ValueError(f"unknown offset kind {self.kind!r}")
        if self.kind == TASK_STACKED:
            if not self.task_jacobians or len(self.task_jacobians) != len(self.task_dims):
                raise ValueError("task_stacked needs matching jacobians and dims")

    @property
    def param_dim(self) -> int:
        if self.kind == CONSTANT:
            return self.dof
        return int(sum(self.task_dims))

    def jacobian(self, state: State | None = None) -> Array:
        """``d f_offset / d w`` as a ``(dof, param_dim)`` matrix."""
        if self.kind == CONSTANT:
            return np.eye(self.dof)
        if state is None:
            raise ValueError("task_stacked offset needs a state to evaluate Jacobians")
        blocks = [provider(state).T for provider in self.task_jacobians]
        return np.hstack(blocks)

    def offset(self, w: Array, state: State | None = None) -> Array:
        """Torque offset for parameters ``w``."""
        if self.kind == CONSTANT:
            return as_joint_vec(w, self.dof)
        return self.jacobian(state) @ as_joint_vec(w, self.param_dim)


def constant_offset_model(dof: int) -> OffsetModel:
    """Offset equal to the parameter vector (Jacobian = identity)."""
    return OffsetModel(kind=CONSTANT, dof=dof)


@dataclass(frozen=True)
class LearnerParams:
    """Hyperparameters of the online update."""

    eta_lr: float
    lambda_reg: float = 0.0
    gamma_mom: float = 0.0
    alpha_var: float = 0.0
    adapt_forgetting: bool = False
    forgetting_error_scale: float = 1.0
    lambda_max: float = 1.0
    variance_decay: float = 0.999
    use_smoother: bool = False

    def __post_init__(self):
        if self.eta_lr <= 0.0:
            raise ValueError("eta_lr must be > 0")
        if self.lambda_reg < 0.0 or self.alpha_var < 0.0 or self.lambda_max < 0.0:
            raise ValueError("lambda_reg, alpha_var, lambda_max must be >= 0")
        if not 0.0 <= self.gamma_mom < 1.0:
            raise ValueError("gamma_mom must be in [0, 1)")
        if self.forgetting_error_scale <= 0.0:
            raise ValueError("forgetting_error_scale must be > 0")
        if not 0.0 < self.variance_decay <= 1.0:
            raise ValueError("variance_decay must be in (0, 1]")


@dataclass(frozen=True)
class LearnerState:
    """Parameters plus momentum and variance buffers; one writer per episode."""

    w: Array
    u: Array
    v: Array
    mean_acc: Array
    tick: int = 0

    @classmethod
    def zeros(cls, param_dim: int) -> "LearnerState":
        return cls(
            w=np.zeros(param_dim),
            u=np.zeros(param_dim),
            v=np.zeros(param_dim),
            mean_acc=np.zeros(param_dim),
        )


def direct_gradient(
    model: OffsetModel, qdd_d: Array, qdd_a: Array, state: State | None = None
) -> Array:
    """Gradient of the acceleration-error loss: ``-J_f^T (qdd_d - qdd_a)``.

    The unknown true inertia cancels against the offset-to-acceleration
    Jacobian, leaving only measurable quantities.
    """
    err = as_joint_vec(qdd_d, model.dof) - as_joint_vec(qdd_a, model.dof)
    if model.kind == CONSTANT:
        return -err
    return -(model.jacobian(state).T @ err)


def loss_oracle(
    plant: Plant,
    model: ApproxModel,
    state: State,
    qdd_d: Array,
    offset_model: OffsetModel,
    w: Array,
) -> float:
    """True-inertia-weighted acceleration error, evaluable only in simulation."""
    f_off = offset_model.offset(w, state)
    qdd_a = actual_acceleration(plant, model, state, qdd_d, f_off)
    err = as_joint_vec(qdd_d, plant.dof) - qdd_a
    m = plant.mass_matrix(state.q)
    return 0.5 * float(err @ m @ err)


def gd_step(params: LearnerParams, lstate: LearnerState, gradient: Array) -> LearnerState:
    """Regularized descent: ``w <- (1 - eta*lambda) w - eta * g``."""
    g = as_joint_vec(gradient, len(lstate.w))
    w = (1.0 - params.eta_lr * params.lambda_reg) * lstate.w - params.eta_lr * g
    return replace(lstate, w=w, tick=lstate.tick + 1)


def momentum_step(
    params: LearnerParams, lstate: LearnerState, gradient: Array, lambda_reg: float = 0.0
) -> LearnerState:
    """``u <- gamma u + (1-gamma)(-g);  w <- (1 - eta*lambda) w + eta u``."""
    g = as_joint_vec(gradient, len(lstate.w))
    u = params.gamma_mom * lstate.u + (1.0 - params.gamma_mom) * (-g)
    w = (1.0 - params.eta_lr * lambda_reg) * lstate.w + params.eta_lr * u
    return replace(lstate, w=w, u=u, tick=lstate.tick + 1)


def smoother_step(
    params: LearnerParams, lstate: LearnerState, gradient: Array, lambda_reg: float = 0.0
) -> LearnerState:
    """``u <- u - eta g;  w <- gamma w + (1-gamma) u``, minus the forgetting term.

    Similar to momentum but not identical: here ``u`` integrates raw
    gradients and ``w`` is an exponential smoothing of that integral.
    """
    g = as_joint_vec(gradient, len(lstate.w))
    u = lstate.u - params.eta_lr * g
    w = (
        params.gamma_mom * lstate.w
        + (1.0 - params.gamma_mom) * u
        - params.eta_lr * lambda_reg * lstate.w
    )
    return replace(lstate, w=w, u=u, tick=lstate.tick + 1)


def variance_scale(params: LearnerParams, lstate: LearnerState) -> Array:
    """Per-dimension step attenuation ``1 / (1 + alpha * v_i)``, in (0, 1]."""
    return 1.0 / (1.0 + params.alpha_var * lstate.v)


def variance_scaled_step(
    params: LearnerParams, lstate: LearnerState, gradient: Array, lambda_reg: float = 0.0
) -> LearnerState:
    """Scale the gradient by observed variance, then run the update pipeline."""
    g = as_joint_vec(gradient, len(lstate.w)) * variance_scale(params, lstate)
    step = smoother_step if params.use_smoother else momentum_step
    return step(params, lstate, g, lambda_reg)


def update_variance(lstate: LearnerState, measurement: Array, decay: float) -> LearnerState:
    """Exponentially weighted mean/variance of the measured accelerations."""
    if not 0.0 < decay <= 1.0:
        raise ValueError("decay must be in (0, 1]")
    x = as_joint_vec(measurement, len(lstate.v))
    mean = decay * lstate.mean_acc + (1.0 - decay) * x
    v = decay * lstate.v + (1.0 - decay) * (x - mean) ** 2
    return replace(lstate, mean_acc=mean, v=v)


def adaptive_lambda(params: LearnerParams, accel_error: Array) -> float:
    """Forgetting strength ramps linearly with the error norm, saturating.

    Zero error means zero regularization (keep everything learned); errors
    at or beyond the scale forget at the maximum rate.
    """
    norm = float(np.linalg.norm(accel_error))
    return params.lambda_max * min(1.0, norm / params.forgetting_error_scale)


def indirect_step(
    params: LearnerParams,
    lstate: LearnerState,
    model: ApproxModel,
    state: State,
    qdd_a: Array,
    tau_applied: Array,
) -> LearnerState:
    """Torque-space baseline: fit the applied torque at the observed acceleration.

    ``w <- w + 2 eta (tau_applied - (M_hat qdd_a + h_hat + w))``. Once the
    residual is zero, ``w`` is a fixed point regardless of the commanded
    acceleration, which is exactly what goes wrong under stiction.
    """
    pred = (
        model.mass_matrix_hat(state.q) @ as_joint_vec(qdd_a, model.dof)
        + model.bias_hat(state.q, state.qd)
        + lstate.w
    )
    residual = as_joint_vec(tau_applied, model.dof) - pred
    w = lstate.w + 2.0 * params.eta_lr * residual
    return replace(lstate, w=w, tick=lstate.tick + 1)


class AccelEstimator:
    """Finite-difference acceleration from a velocity stream, optionally smoothed.

    The first call primes the buffer and reports invalid; callers must skip
    learning on that tick.
    """

    def __init__(self, dt: float, smoothing: float = 0.0):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 <= smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")
        self.dt = float(dt)
        self.smoothing = float(smoothing)
        self._prev_qd: Array | None = None
        self._smoothed: Array | None = None

    def reset(self) -> None:
        self._prev_qd = None
        self._smoothed = None

    def update(self, qd_now: Array) -> tuple[Array, bool]:
        """Return ``(qdd_estimate, valid)`` for the newest velocity sample."""
        qd_now = as_joint_vec(qd_now)
        if self._prev_qd is None:
            self._prev_qd = qd_now
            self._smoothed = np.zeros_like(qd_now)
            return np.zeros_like(qd_now), False
        raw = (qd_now - self._prev_qd) / self.dt
        self._prev_qd = qd_now
        if self.smoothing > 0.0:
            self._smoothed = self.smoothing * self._smoothed + (1.0 - self.smoothing) * raw
            return self._smoothed.copy(), True
        return raw, True


def estimate_accel(est: AccelEstimator, qd_now: Array) -> tuple[Array, bool]:
    """Functional alias for :meth:`AccelEstimator.update`."""
    return est.update(qd_now)


def learner_tick(
    params: LearnerParams,
    lstate: LearnerState,
    model: OffsetModel,
    qdd_d: Array,
    qdd_a_est: Array,
    state: State | None = None,
) -> tuple[LearnerState, Array]:
    """One control-cycle update; returns the new state and the torque offset.

    Pipeline: update the variance buffer with the measured acceleration (in
    gradient coordinates), form the gradient, scale it by the observed
    variance, apply the momentum or smoother update with the (possibly
    adaptive) forgetting regularizer acting on ``w``, then emit the offset.
    """
    jac_t = None if model.kind == CONSTANT else model.jacobian(state).T
    measurement = qdd_a_est if jac_t is None else jac_t @ as_joint_vec(qdd_a_est, model.dof)
    lstate = update_variance(lstate, measurement, params.variance_decay)
    g = direct_gradient(model, qdd_d, qdd_a_est, state)
    if params.adapt_forgetting:
        lam = adaptive_lambda(params, as_joint_vec(qdd_d) - as_joint_vec(qdd_a_est))
    else:
        lam = params.lambda_reg
    lstate = variance_scaled_step(params, lstate, g, lam)
    return lstate, model.offset(lstate.w, state)
