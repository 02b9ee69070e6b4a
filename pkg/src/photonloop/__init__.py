"""Storage-loop photon-number-resolving detector: simulation and estimation."""

from .belief import (
    AllMassLost,
    BeliefMatrix,
    PriorDistribution,
    SupportMismatch,
    expected_loop_photons,
    info_available,
    info_gained,
    init_belief,
    kl_divergence,
    marginal_n0,
    marginal_nk,
    mean_estimate,
    mle_estimate,
    update,
    variance_estimate,
)
from .harness import (
    EnsembleConfig,
    EnsembleSummary,
    PolicySpec,
    optimal_click_variance,
    optimal_estimator_variance,
    optimal_mean_clicks,
    run_ensemble,
    sweep,
)
from .kernel import (
    KernelCache,
    SystemParams,
    TransitionKernel,
    binomial_pmf,
    enumerate_kernel,
    rho,
    transition_kernel,
)
from .simulator import StopRule, TrialRecord, derive_trial_seed, run_trial, sample_round
from .strategy import (
    AdaptivePolicy,
    EpsilonGrid,
    PassivePolicy,
    PolicyDecision,
    predict_outcome_probs,
)

__all__ = [
    "AllMassLost",
    "AdaptivePolicy",
    "BeliefMatrix",
    "EnsembleConfig",
    "EnsembleSummary",
    "EpsilonGrid",
    "KernelCache",
    "PassivePolicy",
    "PolicyDecision",
    "PolicySpec",
    "PriorDistribution",
    "StopRule",
    "SupportMismatch",
    "SystemParams",
    "TransitionKernel",
    "TrialRecord",
    "binomial_pmf",
    "derive_trial_seed",
    "enumerate_kernel",
    "expected_loop_photons",
    "info_available",
    "info_gained",
    "init_belief",
    "kl_divergence",
    "marginal_n0",
    "marginal_nk",
    "mean_estimate",
    "mle_estimate",
    "optimal_click_variance",
    "optimal_estimator_variance",
    "optimal_mean_clicks",
    "predict_outcome_probs",
    "rho",
    "run_ensemble",
    "run_trial",
    "sample_round",
    "sweep",
    "transition_kernel",
    "update",
    "variance_estimate",
]

__version__ = "0.1.0"
