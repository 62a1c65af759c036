"""relulab: a measurement lab for two-layer ReLU regression networks.

Modules cover numerical kernels, the network and its reduced form, the
data-dependent weight function, sharpness and flatness certificates, plain
gradient-descent training, shattering diagnostics, hard function families,
predicted error-rate exponents, and the experiment harness with its CLI.
"""

from relulab.harness import (
    RunRecord,
    ShatterConfig,
    ShatterResult,
    SweepConfig,
    SweepResult,
    generalization_gap,
    make_regression_dataset,
    run_mse_sweep,
    run_shattering_experiment,
    run_single_cell,
)
from relulab.hardfn import (
    BumpFamily,
    CapPacking,
    HardFamily,
    SignFamily,
    atom_l2_norm,
    build_hard_family,
    bump_family,
    pack_caps,
    varshamov_gilbert,
)
from relulab.nets import (
    Dataset,
    ReducedForm,
    TwoLayerNet,
    forward,
    kaiming_init,
    load_checkpoint,
    loss,
    loss_gradient,
    path_norm,
    save_checkpoint,
    to_reduced_form,
    weighted_path_norm,
)
from relulab.numerics import (
    PowerIterationResult,
    QuadratureError,
    derive_rng,
    loglog_slope,
    make_rng,
    power_iteration,
    quadrature_1d,
    sample_gaussian,
    sample_uniform_ball,
)
from relulab.rates import compare_slopes, exponent_table, predicted_exponent
from relulab.sharpness import (
    ActivationBoundaryWarning,
    RegularityCertificate,
    gauss_newton_sharpness,
    hessian_vector_product,
    is_stable,
    regularity_certificate,
    sharpness,
    term_a_lower_bound,
)
from relulab.shattering import (
    NeuronStats,
    ShatteringReport,
    neuron_stats,
    shattering_report,
)
from relulab.training import (
    TrainConfig,
    TrainLog,
    TrainingDivergedError,
    gd_step,
    train,
)
from relulab.weights import (
    AnalyticUniformBall,
    EmpiricalWeight,
    SimplifiedUniformBall,
    g_analytic,
    g_empirical,
    g_simplified,
    tilde_g_analytic,
    tilde_g_empirical,
)

__version__ = "0.1.0"
