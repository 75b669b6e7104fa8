"""Minimum-investment-risk portfolios under a single-factor market model.

Closed-form large-size predictions for the minimal per-asset risk, the
investment concentration, and the expectation-based baseline, together with
exact solvers and Monte Carlo machinery to verify them at finite size.
"""

from .distributions import DistributionSpec, SpecError
from .ensemble import (
    AssetEnsemble,
    EnsembleMoments,
    FactorSeries,
    analytic_moments,
    compute_F,
    compute_moments,
    sample_ensemble,
    sample_factors,
)
from .experiment import (
    AggregateResult,
    ComparisonReport,
    ExperimentFailure,
    ScanPoint,
    TrialConfig,
    TrialRecord,
    compare,
    run_experiment,
    run_trial,
    scan,
)
from .market import (
    ReturnMatrix,
    RiskMatrix,
    expected_wishart,
    generate_returns,
    wishart,
)
from .replica import (
    OrderParameterSet,
    ReplicaPrediction,
    StationarityError,
    beta_derivative,
    closed_form_order_parameters,
    factor_gain,
    free_energy,
    free_energy_gradient,
    predict,
    predict_independent,
    solve_stationary,
)
from .solver import (
    DegenerateMarketError,
    Portfolio,
    SolveReport,
    investment_risk,
    minimize_expected_risk,
    minimize_risk,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AssetEnsemble",
    "ComparisonReport",
    "DegenerateMarketError",
    "DistributionSpec",
    "EnsembleMoments",
    "ExperimentFailure",
    "FactorSeries",
    "OrderParameterSet",
    "Portfolio",
    "ReplicaPrediction",
    "ReturnMatrix",
    "RiskMatrix",
    "ScanPoint",
    "SolveReport",
    "SpecError",
    "StationarityError",
    "TrialConfig",
    "TrialRecord",
    "analytic_moments",
    "beta_derivative",
    "closed_form_order_parameters",
    "compare",
    "compute_F",
    "compute_moments",
    "expected_wishart",
    "factor_gain",
    "free_energy",
    "free_energy_gradient",
    "generate_returns",
    "investment_risk",
    "minimize_expected_risk",
    "minimize_risk",
    "predict",
    "predict_independent",
    "run_experiment",
    "run_trial",
    "sample_ensemble",
    "sample_factors",
    "scan",
    "solve_stationary",
    "wishart",
]
