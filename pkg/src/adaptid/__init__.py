"""adaptid: online learning of inverse-dynamics torque corrections.

A controller commanding accelerations through an approximate dynamics model
realizes the wrong accelerations on the true system. This package learns an
additive torque offset online, from the measurable gap between commanded
and realized accelerations, so raw acceleration policies track accurately
without stiff error feedback. It also contains the simulated plants,
policies, experiment harness, and numerical verification of the PID and
virtual-velocity reinterpretations of the simplest update rule.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    ExperimentConfig,
    NoiseSpec,
    PlantSpec,
    PolicySpec,
    SafetySpec,
    SweepGrid,
    default_sweep_grid,
    load_config,
    load_sweep_grid,
)
from .dynamics import (
    ApproxModel,
    Plant,
    SimConfig,
    SingularMassMatrixError,
    State,
    actual_acceleration,
    forward_dynamics,
    integrate_step,
    inverse_dynamics,
)
from .equivalence import (
    PIDWeights,
    SignalLog,
    VVParams,
    classical_vv_tau,
    collapsed_pid_torque,
    expand_classical_vv,
    expand_online_vv,
    gd_pid_torque,
    pid_term_gradients,
    recursive_tau,
    run_verification,
)
from .harness import (
    EpisodeTrace,
    MetricsRow,
    StictionComparison,
    compare_direct_indirect,
    compute_metrics,
    inject_noise,
    metrics_to_csv,
    run_episode,
    run_sweep,
    trace_to_csv,
)
from .learner import (
    AccelEstimator,
    LearnerParams,
    LearnerState,
    OffsetModel,
    adaptive_lambda,
    constant_offset_model,
    direct_gradient,
    estimate_accel,
    gd_step,
    indirect_step,
    learner_tick,
    loss_oracle,
    momentum_step,
    smoother_step,
    update_variance,
    variance_scaled_step,
)
from .plants import (
    make_biased_arm_pair,
    make_double_integrator_pair,
    make_double_integrator_plant,
    make_perfect_model,
    make_planar_pair,
    make_stiction_plant,
    make_zero_model,
)
from .policies import (
    AffinePolicySegment,
    ChainedPolicy,
    LQRSpec,
    PDPointPolicy,
    chain_segments,
    lqr_backward_pass,
    pd_policy_eval,
)
