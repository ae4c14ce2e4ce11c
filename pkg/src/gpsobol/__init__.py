"""Sobol sensitivity indices for noisy stochastic simulators.

Gaussian-process surrogate construction from replication-averaged
observations, pick-freeze index estimation with asymptotic confidence
intervals, and planning of the simulator budget against the Monte-Carlo
sample size so that surrogate error and sampling error stay balanced.
"""

from .budget import (
    BudgetPlan,
    GaussianMeasureRegime,
    GaussianRegime,
    MaternRegime,
    Regime,
    critical_budget,
    extrapolate_imse,
    plan_budget_from_pilot,
    regime_classify,
    solve_budget_for_imse,
)
from .experiments import (
    CoverageReport,
    pilot_setup,
    run_convergence_check,
    run_coverage_experiment,
)
from .heat import HeatConfig, exact_sobol_indices, exact_solution, simulate_code
from .hyperfit import HyperParams, SearchConfig, fit_hyperparameters, log_marginal_likelihood
from .kernels import (
    EigenSystem,
    GaussianMeasure,
    KernelFamily,
    KernelSpec,
    eval_kernel,
    gaussian_measure_eigensystem,
    gram_matrix,
    hermite_eval,
    matern_eigenvalue_envelope,
    truncation_size,
)
from .sobol import (
    DegenerateFunctionError,
    PickFreezeSample,
    SobolEstimate,
    asymptotic_variance,
    confidence_interval,
    estimate_sobol,
    pick_freeze_sample,
)
from .surrogate import (
    GpModel,
    SpectralModel,
    TrainingSet,
    aggregate_replications,
    bt_squared,
    fit_blup,
    fit_gp,
    imse,
    load_training_csv,
    predict,
    sample_idealized_pair,
    spectral_mse,
)

__version__ = "0.1.0"
