"""Joint-space dynamics primitives: types, forward/inverse dynamics, integration.

Conventions used throughout the package:

* joint vectors are plain 1-D float64 ``numpy`` arrays of length ``dof``
  (positions in rad, velocities in rad/s, accelerations in rad/s^2,
  torques in N*m),
* a ``Plant`` is the true system ``tau = M(q) qdd + h(q, qd) + d(q, qd)``
  with the disturbance ``d`` unknown to the controller,
* an ``ApproxModel`` is the controller's estimate ``(M_hat, h_hat)`` used
  for inverse-dynamics torque computation,
* disturbances enter forward dynamics subtracted from the applied torque:
  ``qdd = M(q)^-1 (tau - h - d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray
MatrixFn = Callable[[Array], Array]
ForceFn = Callable[[Array, Array], Array]

# Condition-number ceiling above which a mass matrix is treated as singular.
MAX_MASS_CONDITION = 1e12


class SingularMassMatrixError(RuntimeError):
    """Mass matrix is not SPD or too ill-conditioned to invert reliably."""


def as_joint_vec(x, dof: int | None = None) -> Array:
    """Coerce to a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"joint vector must be 1-D, got shape {v.shape}")
    if dof is not None and v.shape[0] != dof:
        raise ValueError(f"joint vector has length {v.shape[0]}, expected {dof}")
    if not np.all(np.isfinite(v)):
        raise ValueError("joint vector contains non-finite entries")
    return v


@dataclass(frozen=True)
class State:
    """Joint positions and velocities at time ``t``."""

    q: Array
    qd: Array
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", as_joint_vec(self.q))
        object.__setattr__(self, "qd", as_joint_vec(self.qd, len(self.q)))

    @property
    def dof(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class Plant:
    """True dynamics, unknown to the controller.

    ``custom_accel(q, qd, tau) -> qdd``, when given, replaces the generic
    ``M^-1 (tau - h - d)`` evaluation; regime-switching plants (stiction)
    need the applied torque to decide their acceleration.
    """

    mass_matrix: MatrixFn
    bias: ForceFn
    disturbance: ForceFn
    dof: int
    custom_accel: Callable[[Array, Array, Array], Array] | None = None


@dataclass(frozen=True)
class ApproxModel:
    """Controller-side dynamics estimate used for inverse dynamics."""

    mass_matrix_hat: MatrixFn
    bias_hat: ForceFn
    dof: int


@dataclass(frozen=True)
class SimConfig:
    """Two-rate timing: simulator substeps at ``dt_sim``, control at ``dt_control``."""

    dt_sim: float
    dt_control: float
    duration: float
    seed: int = 0

    def __post_init__(self):
        if self.dt_sim <= 0.0 or self.dt_control <= 0.0 or self.duration < 0.0:
            raise ValueError("dt_sim, dt_control must be > 0 and duration >= 0")
        ratio = self.dt_control / self.dt_sim
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"dt_control={self.dt_control} is not an integer multiple of dt_sim={self.dt_sim}"
            )

    @property
    def substeps(self) -> int:
        """Simulator substeps per control tick."""
        return int(round(self.dt_control / self.dt_sim))

    @property
    def ticks(self) -> int:
        """Number of control ticks in the episode."""
        return int(round(self.duration / self.dt_control))


def spd_solve(m: Array, rhs: Array) -> Array:
    """Solve ``m x = rhs`` for an SPD matrix, raising on ill-conditioning."""
    evals = np.linalg.eigvalsh(m)
    if evals[0] <= 0.0 or evals[-1] / evals[0] > MAX_MASS_CONDITION:
        raise SingularMassMatrixError(
            f"mass matrix not SPD or condition > {MAX_MASS_CONDITION:g} "
            f"(eigenvalue range [{evals[0]:.3e}, {evals[-1]:.3e}])"
        )
    return np.linalg.solve(m, rhs)


def forward_dynamics(plant: Plant, state: State, tau: Array) -> Array:
    """Acceleration produced by applying ``tau`` to the true plant."""
    tau = as_joint_vec(tau, plant.dof)
    if state.dof != plant.dof:
        raise ValueError(f"state dof {state.dof} != plant dof {plant.dof}")
    if plant.custom_accel is not None:
        return as_joint_vec(plant.custom_accel(state.q, state.qd, tau), plant.dof)
    m = plant.mass_matrix(state.q)
    net = tau - plant.bias(state.q, state.qd) - plant.disturbance(state.q, state.qd)
    return spd_solve(m, net)


def inverse_dynamics(model: ApproxModel, state: State, qdd_d: Array) -> Array:
    """Torque the approximate model predicts for the desired acceleration."""
    qdd_d = as_joint_vec(qdd_d, model.dof)
    if state.dof != model.dof:
        raise ValueError(f"state dof {state.dof} != model dof {model.dof}")
    return model.mass_matrix_hat(state.q) @ qdd_d + model.bias_hat(state.q, state.qd)


def actual_acceleration(
    plant: Plant, model: ApproxModel, state: State, qdd_d: Array, f_offset: Array
) -> Array:
    """Acceleration realized when the model's torque plus an offset hits the plant."""
    tau = inverse_dynamics(model, state, qdd_d) + as_joint_vec(f_offset, model.dof)
    return forward_dynamics(plant, state, tau)


def integrate_step(state: State, qdd: Array, dt: float) -> State:
    """One semi-implicit Euler step: velocity first, then position."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    qdd = as_joint_vec(qdd, state.dof)
    qd_next = state.qd + dt * qdd
    q_next = state.q + dt * qd_next
    return State(q=q_next, qd=qd_next, t=state.t + dt)
