"""Acceleration policies: PD-to-point and chained finite-horizon LQR segments.

A policy maps ``(t, state)`` to a desired joint acceleration. Policies are
immutable after construction and safe to evaluate concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Array, State, as_joint_vec


@dataclass(frozen=True)
class PDPointPolicy:
    """Acceleration-space PD regulation to a fixed joint target."""

    target: Array
    kp: float
    kd: float

    def __post_init__(self):
        object.__setattr__(self, "target", as_joint_vec(self.target))
        if self.kp <= 0.0 or self.kd < 0.0:
            raise ValueError("kp must be > 0 and kd >= 0")

    def accel(self, t: float, state: State) -> Array:
        return pd_policy_eval(self, state)


def pd_policy_eval(policy: PDPointPolicy, state: State) -> Array:
    """``qdd_d = kp (target - q) - kd qd``."""
    if state.dof != len(policy.target):
        raise ValueError("state dof does not match policy target")
    return policy.kp * (policy.target - state.q) - policy.kd * state.qd


@dataclass(frozen=True)
class AffinePolicySegment:
    """Time-varying affine policy ``u_k = gains[k] @ (q, qd) + offsets[k]``.

    ``gains`` has shape ``(steps, n, 2n)`` and ``offsets`` ``(steps, n)``;
    step ``k`` covers ``[k*dt, (k+1)*dt)`` within the segment.
    """

    gains: Array
    offsets: Array
    duration: float
    dt: float

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        offsets = np.asarray(self.offsets, dtype=float)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "offsets", offsets)
        if gains.ndim != 3 or offsets.ndim != 2 or gains.shape[0] != offsets.shape[0]:
            raise ValueError("gains must be (steps, n, 2n) and offsets (steps, n)")
        n = offsets.shape[1]
        if gains.shape[1:] != (n, 2 * n):
            raise ValueError(f"gain rows must be {n}x{2 * n}, got {gains.shape[1:]}")
        steps = int(round(self.duration / self.dt))
        if steps != gains.shape[0] or abs(steps * self.dt - self.duration) > 1e-9:
            raise ValueError("step count must equal duration / dt exactly")

    @property
    def steps(self) -> int:
        return self.gains.shape[0]

    @property
    def dof(self) -> int:
        return self.offsets.shape[1]

    def eval_step(self, k: int, state: State) -> Array:
        k = min(max(k, 0), self.steps - 1)
        x = np.concatenate([state.q, state.qd])
        return self.gains[k] @ x + self.offsets[k]


@dataclass(frozen=True)
class LQRSpec:
    """Weights, horizon, and goal for a per-joint double-integrator LQR."""

    q_pos: float
    q_vel: float
    r: float
    horizon: int
    goal: Array

    def __post_init__(self):
        object.__setattr__(self, "goal", as_joint_vec(self.goal))
        if self.q_pos < 0.0 or self.q_vel < 0.0:
            raise ValueError("state weights must be >= 0")
        if self.r <= 0.0:
            raise ValueError("control weight r must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def riccati_gains(q_pos: float, q_vel: float, r: float, horizon: int, dt: float) -> Array:
    """Backward Riccati recursion on the discrete double integrator.

    ``x = (q - goal, qd)`` with ``A = [[1, dt], [0, 1]]``, ``B = (dt^2/2, dt)``;
    the terminal cost equals the stage state cost. Returns the ``(horizon, 2)``
    feedback gains ``K_t`` for ``u_t = -K_t x_t``, identical for every joint.
    """
    a = np.array([[1.0, dt], [0.0, 1.0]])
    b = np.array([0.5 * dt * dt, dt])
    q = np.diag([q_pos, q_vel])
    p = q.copy()
    gains = np.zeros((horizon, 2))
    for t in range(horizon - 1, -1, -1):
        pb = p @ b
        k = (b @ pb + r) ** -1 * (pb @ a)
        gains[t] = k
        a_cl = a - np.outer(b, k)
        p = q + r * np.outer(k, k) + a_cl.T @ p @ a_cl
    return gains


def lqr_backward_pass(spec: LQRSpec, dt: float) -> AffinePolicySegment:
    """Realize an LQR spec as an affine acceleration-policy segment."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = len(spec.goal)
    ks = riccati_gains(spec.q_pos, spec.q_vel, spec.r, spec.horizon, dt)
    gains = np.zeros((spec.horizon, n, 2 * n))
    offsets = np.zeros((spec.horizon, n))
    idx = np.arange(n)
    for t in range(spec.horizon):
        kp, kd = ks[t]
        gains[t, idx, idx] = -kp
        gains[t, idx, n + idx] = -kd
        offsets[t] = kp * spec.goal
    return AffinePolicySegment(
        gains=gains, offsets=offsets, duration=spec.horizon * dt, dt=dt
    )


@dataclass(frozen=True)
class ChainedPolicy:
    """Piecewise policy switching between segments on half-open intervals.

    Queries past the total duration hold the final segment's terminal step.
    """

    segments: tuple[AffinePolicySegment, ...]

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("need at least one segment")
        dofs = {s.dof for s in self.segments}
        if len(dofs) != 1:
            raise ValueError("segments must share a dof")

    @property
    def dof(self) -> int:
        return self.segments[0].dof

    @property
    def boundaries(self) -> Array:
        """Start times of each segment plus the total duration."""
        ends = np.cumsum([s.duration for s in self.segments])
        return np.concatenate([[0.0], ends])

    def locate(self, t: float) -> tuple[int, int]:
        """Segment index and within-segment step active at time ``t``."""
        start = 0.0
        for i, seg in enumerate(self.segments):
            end = start + seg.duration
            if t < end or i == len(self.segments) - 1:
                k = int(np.floor((t - start) / seg.dt + 1e-9))
                return i, min(max(k, 0), seg.steps - 1)
            start = end
        raise AssertionError("unreachable")

    def accel(self, t: float, state: State) -> Array:
        i, k = self.locate(t)
        return self.segments[i].eval_step(k, state)


def chain_segments(segments: list[AffinePolicySegment]) -> ChainedPolicy:
    """Concatenate segments into one piecewise policy."""
    return ChainedPolicy(segments=tuple(segments))


def make_waypoint_lqr_policy(
    rng: np.random.Generator,
    dof: int,
    segments: int,
    segment_duration: float,
    dt: float,
    q_pos: float = 100.0,
    q_vel: float = 10.0,
    r: float = 1.0,
    goal_amp: float = 1.0,
) -> ChainedPolicy:
    """Chain of LQR segments toward random waypoints in ``[-goal_amp, goal_amp]``."""
    horizon = int(round(segment_duration / dt))
    if abs(horizon * dt - segment_duration) > 1e-9:
        raise ValueError("segment_duration must be an integer multiple of dt")
    segs = []
    for _ in range(segments):
        goal = rng.uniform(-goal_amp, goal_amp, dof)
        spec = LQRSpec(q_pos=q_pos, q_vel=q_vel, r=r, horizon=horizon, goal=goal)
        segs.append(lqr_backward_pass(spec, dt))
    return chain_segments(segs)
