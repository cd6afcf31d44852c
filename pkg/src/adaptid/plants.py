"""Concrete plants and mismatched model pairs used in the experiments.

Each ``make_*`` factory returns immutable closures, so plants are safe to
share across threads and sweep workers.
"""

from __future__ import annotations

import numpy as np

from .dynamics import ApproxModel, Array, Plant, as_joint_vec

# Friction/bias constants of the biased-arm plant.
ARM_FRICTION_AMP = 7.0
ARM_BIAS_AMP = 5.0

# Kinetic friction once stiction breaks, as a fraction of the breakaway torque.
KINETIC_FRICTION_RATIO = 0.8


def sigmoid(x: Array) -> Array:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _zero_force(q: Array, qd: Array) -> Array:
    return np.zeros_like(q)


def make_double_integrator_plant(dof: int, mass: float = 1.0) -> Plant:
    """Analytic oracle plant: ``M = mass*I``, no bias, no disturbance."""
    if mass <= 0.0:
        raise ValueError("mass must be positive")
    m = float(mass) * np.eye(dof)
    return Plant(
        mass_matrix=lambda q: m,
        bias=_zero_force,
        disturbance=_zero_force,
        dof=dof,
    )


def make_double_integrator_pair(dof: int, mass: float = 1.0) -> tuple[Plant, ApproxModel]:
    """Double integrator with an exactly matching model."""
    plant = make_double_integrator_plant(dof, mass)
    model = ApproxModel(
        mass_matrix_hat=plant.mass_matrix, bias_hat=_zero_force, dof=dof
    )
    return plant, model


def planar_mass_matrix(q: Array) -> Array:
    """State-dependent 2-DOF mass matrix ``5 (v v^T + 0.05 I)``."""
    v0 = np.sin(5.0 * q[0])
    v1 = np.cos(2.0 * q[1])
    return np.array(
        [
            [5.0 * v0 * v0 + 0.25, 5.0 * v0 * v1],
            [5.0 * v0 * v1, 5.0 * v1 * v1 + 0.25],
        ]
    )


def planar_friction(q: Array, qd: Array) -> Array:
    """Spatially sinusoidal friction field of the planar test system."""
    return np.array([100.0 * np.sin(50.0 * q[0]), 5.0 * np.sin(50.0 * q[1])])


def make_planar_pair() -> tuple[Plant, ApproxModel]:
    """The 2-DOF planar system with its deliberately poor diagonal model.

    True plant: ``M(q) = 5 (v(q) v(q)^T + 0.05 I)`` with
    ``v(q) = (sin 5 q1, cos 2 q2)`` plus the sinusoidal friction field.
    The controller model is the constant ``M_hat = 0.5 I`` with no bias,
    an order of magnitude lighter than the true inertia.
    """
    plant = Plant(
        mass_matrix=planar_mass_matrix,
        bias=_zero_force,
        disturbance=planar_friction,
        dof=2,
    )
    m_hat = 0.5 * np.eye(2)
    model = ApproxModel(mass_matrix_hat=lambda q: m_hat, bias_hat=_zero_force, dof=2)
    return plant, model


def biased_arm_disturbance(q: Array, qd: Array, damping: Array) -> Array:
    """Position-dependent friction and torque bias plus viscous damping."""
    s = np.sin(5.0 * q)
    friction = -ARM_FRICTION_AMP * s * s * (2.0 * sigmoid(qd) - 1.0)
    bias = -ARM_BIAS_AMP * s
    return friction + bias + damping * qd


def make_biased_arm_pair(
    n: int = 7, inertia=1.0, damping=0.5
) -> tuple[Plant, ApproxModel]:
    """Diagonal-inertia arm with unmodeled friction, bias, and damping.

    The controller model shares the true inertia but knows nothing about
    the disturbance torques, reproducing a severe-model-mismatch setup.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    inertia = np.broadcast_to(np.asarray(inertia, dtype=float), (n,)).copy()
    damping = np.broadcast_to(np.asarray(damping, dtype=float), (n,)).copy()
    if np.any(inertia <= 0.0) or np.any(damping < 0.0):
        raise ValueError("inertia entries must be > 0 and damping entries >= 0")
    m = np.diag(inertia)
    plant = Plant(
        mass_matrix=lambda q: m,
        bias=_zero_force,
        disturbance=lambda q, qd: biased_arm_disturbance(q, qd, damping),
        dof=n,
    )
    model = ApproxModel(mass_matrix_hat=lambda q: m, bias_hat=_zero_force, dof=n)
    return plant, model


def make_stiction_plant(
    mass: float, breakaway: float, v_eps: float = 1e-3
) -> Plant:
    """1-DOF plant that produces exactly zero acceleration below breakaway.

    Below ``v_eps`` speed and with net torque within the breakaway band the
    joint is stuck; otherwise Coulomb kinetic friction of magnitude
    ``0.8 * breakaway`` opposes the motion (or, on breakaway from rest, the
    applied torque).
    """
    if mass <= 0.0 or breakaway < 0.0 or v_eps <= 0.0:
        raise ValueError("mass and v_eps must be > 0, breakaway >= 0")
    kinetic = KINETIC_FRICTION_RATIO * breakaway
    m = np.array([[float(mass)]])

    def accel(q: Array, qd: Array, tau: Array) -> Array:
        net = tau[0]
        if abs(qd[0]) < v_eps:
            if abs(net) <= breakaway:
                return np.zeros(1)
            return np.array([(net - kinetic * np.sign(net)) / mass])
        return np.array([(net - kinetic * np.sign(qd[0])) / mass])

    return Plant(
        mass_matrix=lambda q: m,
        bias=_zero_force,
        disturbance=_zero_force,
        dof=1,
        custom_accel=accel,
    )


def make_perfect_model(plant: Plant) -> ApproxModel:
    """Model matching the plant exactly, disturbance folded into the bias.

    With this model, inverse dynamics followed by forward dynamics is the
    identity on desired accelerations; used to generate reference
    trajectories.
    """
    return ApproxModel(
        mass_matrix_hat=plant.mass_matrix,
        bias_hat=lambda q, qd: plant.bias(q, qd) + plant.disturbance(q, qd),
        dof=plant.dof,
    )


def make_zero_model(dof: int) -> ApproxModel:
    """Degenerate model ``M_hat = 0, h_hat = 0``.

    The commanded torque then comes entirely from the learned offset; the
    offset function stands in for the full inverse dynamics map. Never used
    where ``M_hat`` must be inverted.
    """
    zero = np.zeros((dof, dof))
    return ApproxModel(mass_matrix_hat=lambda q: zero, bias_hat=_zero_force, dof=dof)


def random_initial_velocity(rng: np.random.Generator, dof: int, amp: float) -> Array:
    """Per-component uniform draw on ``[-amp, amp]``."""
    if amp < 0.0:
        raise ValueError("amp must be >= 0")
    if amp == 0.0:
        return np.zeros(dof)
    return as_joint_vec(rng.uniform(-amp, amp, dof))
