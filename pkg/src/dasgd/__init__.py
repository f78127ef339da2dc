"""Wasserstein-robust contextual newsvendor training via adversarial
data augmentation, with calibration, baselines, a synthetic benchmark,
and an experiment harness."""

from .baselines import ErmConfig, erm_train, evaluate_policy, saa_quantile
from .calibration import (
    Confidence,
    coverage_probability,
    estimate_diameter,
    radius_for_confidence,
)
from .core import (
    Dataset,
    DroConfig,
    RunMetrics,
    Sample,
    SupportBox,
    TrainState,
    TransportCost,
    bounding_box,
    load_dataset,
    project_to_support,
    save_dataset,
    substream,
    support_diameter,
    transport_distance,
)
from .costs import (
    NewsvendorParams,
    SmoothCoeffs,
    apply_policy,
    cost_kinked,
    cost_smoothed,
    cost_smoothed_dz,
    default_delta,
    grad_theta_cost,
    grad_x_cost,
    lipschitz_xx,
    policy_eval,
    smooth_coeffs,
)
from .datagen import GeneratorSource, GenSpec, generate, truth_optimal_cost
from .harness import (
    ExperimentConfig,
    OnlineConfig,
    TimingConfig,
    TrialRecord,
    run_experiment,
    run_online,
    summarize,
    timing_study,
)
from .inner_max import PerturbResult, h_eval, oracle_grid_max, perturb
from .sgd import (
    BootstrapSource,
    StepSchedule,
    StreamSource,
    clamp_gamma,
    default_state,
    default_steps,
    dual_objective_estimate,
    full_gradient_estimate,
    train,
)

__version__ = "0.1.0"
