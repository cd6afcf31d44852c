import numpy as np
import pytest

from adaptid.dynamics import State, forward_dynamics, integrate_step
from adaptid.plants import (
    biased_arm_disturbance,
    make_biased_arm_pair,
    make_perfect_model,
    make_planar_pair,
    make_stiction_plant,
    make_zero_model,
    planar_friction,
    sigmoid,
)


def test_planar_mass_matrix_pinned_values():
    plant, _ = make_planar_pair()
    m = plant.mass_matrix(np.array([np.pi / 10, 0.0]))
    np.testing.assert_allclose(m, [[5.25, 5.0], [5.0, 5.25]], atol=1e-12)
    m0 = plant.mass_matrix(np.zeros(2))
    np.testing.assert_allclose(m0, np.diag([0.25, 5.25]), atol=1e-12)


def test_planar_model_is_light_diagonal():
    _, model = make_planar_pair()
    np.testing.assert_allclose(model.mass_matrix_hat(np.ones(2)), 0.5 * np.eye(2))
    np.testing.assert_allclose(model.bias_hat(np.ones(2), np.ones(2)), np.zeros(2))


def test_planar_friction_pinned_values():
    np.testing.assert_allclose(planar_friction(np.zeros(2), np.zeros(2)), np.zeros(2))
    mu = planar_friction(np.array([np.pi / 100, np.pi / 100]), np.zeros(2))
    np.testing.assert_allclose(mu, [100.0, 5.0], atol=1e-10)


def test_planar_mass_matrix_eigenvalue_floor():
    # Analytic bound: min eigenvalue of 5 (v v^T + 0.05 I) is 5 * 0.05.
    plant, _ = make_planar_pair()
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        evals = np.linalg.eigvalsh(plant.mass_matrix(rng.uniform(-10, 10, 2)))
        assert evals[0] >= 0.25 - 1e-12


def test_biased_arm_disturbance_zero_at_origin():
    d = biased_arm_disturbance(np.zeros(3), np.zeros(3), np.full(3, 0.5))
    np.testing.assert_allclose(d, np.zeros(3))


def test_biased_arm_disturbance_saturated_velocity():
    # sin(5q) = 1 at q = pi/10; a fast joint saturates the sigmoid.
    q = np.full(2, np.pi / 10)
    qd = np.array([100.0, 100.0])
    damping = np.array([0.0, 0.5])
    d = biased_arm_disturbance(q, qd, damping)
    np.testing.assert_allclose(d[0], -12.0, atol=1e-9)
    np.testing.assert_allclose(d[1], -12.0 + 0.5 * 100.0, atol=1e-9)


def test_biased_arm_friction_odd_in_velocity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        q = rng.uniform(-2, 2, 4)
        qd = rng.uniform(-5, 5, 4)
        no_damping = np.zeros(4)
        fwd = biased_arm_disturbance(q, qd, no_damping)
        rev = biased_arm_disturbance(q, -qd, no_damping)
        bias = -5.0 * np.sin(5.0 * q)
        np.testing.assert_allclose(fwd - bias, -(rev - bias), atol=1e-12)


def test_biased_arm_disturbance_bound():
    rng = np.random.default_rng(6)
    damping = np.array([0.5, 1.5, 0.0])
    for _ in range(500):
        q = rng.uniform(-20, 20, 3)
        qd = rng.uniform(-50, 50, 3)
        d = biased_arm_disturbance(q, qd, damping)
        assert np.all(np.abs(d) <= 7.0 + 5.0 + damping * np.abs(qd) + 1e-12)


def test_biased_arm_pair_shares_inertia():
    plant, model = make_biased_arm_pair(3, inertia=(1.0, 2.0, 3.0), damping=0.1)
    q = np.zeros(3)
    np.testing.assert_allclose(plant.mass_matrix(q), np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(model.mass_matrix_hat(q), plant.mass_matrix(q))
    np.testing.assert_allclose(model.bias_hat(q, np.ones(3)), np.zeros(3))


def test_biased_arm_pair_validation():
    with pytest.raises(ValueError):
        make_biased_arm_pair(0)
    with pytest.raises(ValueError):
        make_biased_arm_pair(2, inertia=(1.0, -1.0))


def test_sigmoid_identity():
    x = np.linspace(-20, 20, 101)
    np.testing.assert_allclose(sigmoid(-x), 1.0 - sigmoid(x), atol=1e-15)


def test_stiction_stuck_below_breakaway():
    plant = make_stiction_plant(mass=1.0, breakaway=5.0, v_eps=1e-3)
    at_rest = State(q=[0.0], qd=[0.0])
    qdd = forward_dynamics(plant, at_rest, np.array([4.0]))
    np.testing.assert_array_equal(qdd, [0.0])


def test_stiction_breakaway_kinetic_friction():
    # Kinetic friction is 0.8 * breakaway once the band is exceeded.
    plant = make_stiction_plant(mass=1.0, breakaway=5.0, v_eps=1e-3)
    at_rest = State(q=[0.0], qd=[0.0])
    np.testing.assert_allclose(forward_dynamics(plant, at_rest, np.array([6.0])), [2.0])
    np.testing.assert_allclose(forward_dynamics(plant, at_rest, np.array([-6.0])), [-2.0])


def test_stiction_moving_decelerates():
    plant = make_stiction_plant(mass=1.0, breakaway=5.0, v_eps=1e-3)
    moving = State(q=[0.0], qd=[1.0])
    np.testing.assert_allclose(forward_dynamics(plant, moving, np.array([0.0])), [-4.0])


def test_stiction_rest_is_closed_under_simulation():
    # A resting state below breakaway stays exactly at rest forever.
    plant = make_stiction_plant(mass=2.0, breakaway=5.0, v_eps=1e-3)
    state = State(q=[0.3], qd=[0.0])
    for _ in range(5000):
        qdd = forward_dynamics(plant, state, np.array([4.999]))
        state = integrate_step(state, qdd, 1e-3)
    assert state.q[0] == 0.3
    assert state.qd[0] == 0.0


def test_perfect_model_folds_disturbance():
    plant, _ = make_planar_pair()
    model = make_perfect_model(plant)
    q = np.array([0.7, -0.3])
    qd = np.array([1.0, 0.5])
    np.testing.assert_allclose(
        model.bias_hat(q, qd), plant.bias(q, qd) + plant.disturbance(q, qd)
    )


def test_zero_model_maps_accel_to_nothing():
    model = make_zero_model(2)
    from adaptid.dynamics import inverse_dynamics

    tau = inverse_dynamics(model, State(q=[1.0, 2.0], qd=[3.0, 4.0]), np.array([10.0, 20.0]))
    np.testing.assert_array_equal(tau, np.zeros(2))
