import numpy as np
import pytest

from adaptid.dynamics import (
    SimConfig,
    SingularMassMatrixError,
    State,
    actual_acceleration,
    forward_dynamics,
    integrate_step,
    inverse_dynamics,
)
from adaptid.plants import (
    make_double_integrator_pair,
    make_double_integrator_plant,
    make_planar_pair,
)
from adaptid.dynamics import ApproxModel, Plant


def random_spd_plant(rng, n):
    a = rng.standard_normal((n, n))
    m = a @ a.T + n * np.eye(n)
    bias_coef = rng.standard_normal(n)
    dist_coef = rng.standard_normal(n)
    return Plant(
        mass_matrix=lambda q: m,
        bias=lambda q, qd: bias_coef * np.sin(q) + 0.1 * qd,
        disturbance=lambda q, qd: dist_coef * np.cos(q),
        dof=n,
    )


def test_forward_dynamics_double_integrator():
    plant = make_double_integrator_plant(2, mass=2.0)
    qdd = forward_dynamics(plant, State(q=[0.0, 0.0], qd=[0.0, 0.0]), np.array([4.0, 0.0]))
    np.testing.assert_allclose(qdd, [2.0, 0.0])


def test_forward_dynamics_planar_origin():
    # v(0) = (sin 0, cos 0) = (0, 1) so M = diag(0.25, 5.25); friction is zero there.
    plant, _ = make_planar_pair()
    qdd = forward_dynamics(plant, State(q=[0.0, 0.0], qd=[0.0, 0.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(qdd, [4.0, 1.0 / 5.25], rtol=1e-12)


def test_forward_dynamics_force_balance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        plant = random_spd_plant(rng, n)
        state = State(q=rng.standard_normal(n), qd=rng.standard_normal(n))
        tau = plant.bias(state.q, state.qd) + plant.disturbance(state.q, state.qd)
        qdd = forward_dynamics(plant, state, tau)
        np.testing.assert_allclose(qdd, np.zeros(n), atol=1e-12)


def test_forward_dynamics_rejects_singular_mass():
    bad = Plant(
        mass_matrix=lambda q: np.diag([1.0, 1e-13]),
        bias=lambda q, qd: np.zeros(2),
        disturbance=lambda q, qd: np.zeros(2),
        dof=2,
    )
    with pytest.raises(SingularMassMatrixError):
        forward_dynamics(bad, State(q=[0.0, 0.0], qd=[0.0, 0.0]), np.zeros(2))


def test_inverse_dynamics_light_diagonal_model():
    _, model = make_planar_pair()
    state = State(q=[0.3, -0.2], qd=[0.0, 0.0])
    tau = inverse_dynamics(model, state, np.array([10.0, -4.0]))
    np.testing.assert_allclose(tau, [5.0, -2.0])


def test_inverse_dynamics_zero_accel_zero_bias():
    _, model = make_double_integrator_pair(3, mass=5.0)
    tau = inverse_dynamics(model, State(q=np.zeros(3), qd=np.zeros(3)), np.zeros(3))
    np.testing.assert_allclose(tau, np.zeros(3))


def test_inverse_dynamics_direct_evaluation():
    model = ApproxModel(
        mass_matrix_hat=lambda q: np.diag([1.0, 2.0]),
        bias_hat=lambda q, qd: np.array([0.5, 0.5]),
        dof=2,
    )
    tau = inverse_dynamics(model, State(q=[0.0, 0.0], qd=[0.0, 0.0]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(tau, [1.5, 2.5])


def test_inverse_dynamics_dimension_mismatch():
    _, model = make_double_integrator_pair(2)
    with pytest.raises(ValueError):
        inverse_dynamics(model, State(q=[0.0, 0.0], qd=[0.0, 0.0]), np.zeros(3))


def test_actual_acceleration_perfect_model_identity():
    plant, model = make_double_integrator_pair(2, mass=3.0)
    state = State(q=[0.1, -0.4], qd=[1.0, 2.0])
    qdd_d = np.array([5.0, -1.0])
    qdd_a = actual_acceleration(plant, model, state, qdd_d, np.zeros(2))
    np.testing.assert_allclose(qdd_a, qdd_d, atol=1e-10)


def test_actual_acceleration_superposition():
    plant, model = make_double_integrator_pair(2, mass=2.0)
    state = State(q=np.zeros(2), qd=np.zeros(2))
    qdd_d = np.array([1.0, 1.0])
    delta = np.array([4.0, -2.0])
    qdd_a = actual_acceleration(plant, model, state, qdd_d, delta)
    np.testing.assert_allclose(qdd_a, qdd_d + delta / 2.0, atol=1e-12)


def test_actual_acceleration_matches_two_step_pipeline():
    # The explicit torque-then-forward-dynamics pipeline is the oracle.
    rng = np.random.default_rng(1)
    plant, model = make_planar_pair()
    for _ in range(50):
        state = State(q=rng.uniform(-2, 2, 2), qd=rng.uniform(-3, 3, 2))
        qdd_d = rng.uniform(-20, 20, 2)
        f_off = rng.uniform(-50, 50, 2)
        tau = inverse_dynamics(model, state, qdd_d) + f_off
        expected = forward_dynamics(plant, state, tau)
        got = actual_acceleration(plant, model, state, qdd_d, f_off)
        assert np.array_equal(got, expected)


def test_integrate_step_basic():
    s1 = integrate_step(State(q=[0.0], qd=[0.0]), np.array([1.0]), 0.001)
    np.testing.assert_allclose(s1.qd, [0.001])
    np.testing.assert_allclose(s1.q, [1e-6])
    assert s1.t == pytest.approx(0.001)


def test_integrate_step_uniform_motion():
    s = State(q=[1.0, -1.0], qd=[2.0, 3.0])
    s1 = integrate_step(s, np.zeros(2), 0.01)
    np.testing.assert_allclose(s1.q, s.q + 0.01 * s.qd)
    np.testing.assert_allclose(s1.qd, s.qd)


def test_integrate_step_constant_accel_closed_form():
    # Semi-implicit Euler from rest: qd_N = g N dt, q_N = g dt^2 N(N+1)/2.
    g = 9.81
    dt = 1e-3
    steps = 1000
    state = State(q=[0.0], qd=[0.0])
    for _ in range(steps):
        state = integrate_step(state, np.array([g]), dt)
    t_total = steps * dt
    np.testing.assert_allclose(state.qd, [g * t_total], rtol=1e-12)
    np.testing.assert_allclose(
        state.q, [g * (0.5 * t_total**2 + 0.5 * dt * t_total)], rtol=1e-12
    )


def test_integrate_step_rejects_nonfinite():
    with pytest.raises(ValueError):
        integrate_step(State(q=[0.0], qd=[0.0]), np.array([np.nan]), 0.001)


def test_mass_matrix_symmetry_property():
    rng = np.random.default_rng(2)
    plant, _ = make_planar_pair()
    for _ in range(1000):
        m = plant.mass_matrix(rng.uniform(-np.pi, np.pi, 2))
        assert np.max(np.abs(m - m.T)) <= 1e-12 * np.max(np.abs(m))


def test_inverse_then_forward_identity_property():
    rng = np.random.default_rng(3)
    for _ in range(25):
        n = int(rng.integers(1, 5))
        plant = random_spd_plant(rng, n)
        exact = Plant(
            mass_matrix=plant.mass_matrix,
            bias=lambda q, qd, p=plant: p.bias(q, qd) + p.disturbance(q, qd),
            disturbance=lambda q, qd: np.zeros(len(q)),
            dof=n,
        )
        model = ApproxModel(
            mass_matrix_hat=exact.mass_matrix, bias_hat=exact.bias, dof=n
        )
        state = State(q=rng.standard_normal(n), qd=rng.standard_normal(n))
        qdd_d = rng.uniform(-10, 10, n)
        qdd_a = forward_dynamics(exact, state, inverse_dynamics(model, state, qdd_d))
        np.testing.assert_allclose(qdd_a, qdd_d, atol=1e-10)


def test_undamped_drift_conserves_velocity():
    plant = make_double_integrator_plant(2, mass=1.0)
    state = State(q=np.zeros(2), qd=[0.5, -0.25])
    for _ in range(2000):
        qdd = forward_dynamics(plant, state, np.zeros(2))
        state = integrate_step(state, qdd, 1e-3)
    np.testing.assert_array_equal(state.qd, [0.5, -0.25])


def test_sim_config_validation():
    cfg = SimConfig(dt_sim=1e-3, dt_control=5e-3, duration=1.0, seed=1)
    assert cfg.substeps == 5
    assert cfg.ticks == 200
    with pytest.raises(ValueError):
        SimConfig(dt_sim=1e-3, dt_control=2.5e-3, duration=1.0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(dt_sim=-1e-3, dt_control=1e-3, duration=1.0, seed=1)
