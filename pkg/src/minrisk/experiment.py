"""Monte Carlo trials, aggregation, parameter sweeps, and theory comparison.

A trial samples a market, minimizes the realized risk and the expected-risk
baseline, and records per-trial statistics next to the prediction for that
trial's own moments.  Everything is a pure function of the configuration:
per-trial seed streams make trials independent and reproducible in any order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .distributions import DistributionSpec
from .ensemble import AssetEnsemble, FactorSeries, compute_moments, sample_ensemble, sample_factors
from .market import NOISE_FAMILIES, expected_wishart, generate_returns, wishart
from .replica import PREDICTION_COLUMNS, ReplicaPrediction, predict
from .rng import child_seed
from .solver import DegenerateMarketError, minimize_expected_risk, minimize_risk

__all__ = [
    "QUANTITIES",
    "MOMENTS_MODES",
    "SCAN_AXES",
    "DEFAULT_TOLERANCES",
    "DEFAULT_Z_MAX",
    "EXPERIMENT_CSV_COLUMNS",
    "TrialConfig",
    "TrialRecord",
    "AggregateResult",
    "QuantityVerdict",
    "ComparisonReport",
    "ScanPoint",
    "ExperimentFailure",
    "run_trial",
    "run_experiment",
    "scan",
    "compare",
    "experiment_csv_row",
]

QUANTITIES = ("epsilon", "q_w", "epsilon_or", "kappa", "q_w_or")
MOMENTS_MODES = ("realized_per_trial", "shared_ensemble")
SCAN_AXES = ("alpha", "N", "F_scale")

DEFAULT_TOLERANCES = {
    "epsilon": 0.03,
    "q_w": 0.05,
    "epsilon_or": 0.05,
    "kappa": 0.05,
    "q_w_or": 0.05,
}
DEFAULT_Z_MAX = 4.0

EXPERIMENT_CSV_COLUMNS = (
    "alpha",
    "N",
    "p",
    "trials",
    "eps_mean",
    "eps_se",
    "eps_replica",
    "qw_mean",
    "qw_se",
    "qw_replica",
    "eps_or_mean",
    "eps_or_se",
    "eps_or_replica",
    "kappa_mean",
    "kappa_theory",
    "qw_or_replica",
    "status",
)


class ExperimentFailure(RuntimeError):
    """A trial failed; completed records travel along as a partial report."""

    def __init__(self, message: str, completed: list, failures: list):
        super().__init__(message)
        self.completed = completed
        self.failures = failures


@dataclass(frozen=True)
class TrialConfig:
    """Full description of one Monte Carlo experiment.

    ``reference_seed`` pins the shared/reference ensemble streams; it defaults
    to ``base_seed`` and is kept fixed across sweep points so theory columns
    refer to the same reference market.
    """

    N: int
    alpha: float
    v_spec: DistributionSpec
    b_spec: DistributionSpec
    f_spec: DistributionSpec
    trials: int
    base_seed: int
    noise_family: str = "gaussian"
    moments_mode: str = "realized_per_trial"
    reference_seed: int | None = None

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not self.alpha > 1:
            raise ValueError(f"alpha = {self.alpha:g} must exceed 1")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.noise_family not in NOISE_FAMILIES:
            raise ValueError(f"noise_family must be one of {NOISE_FAMILIES}")
        if self.moments_mode not in MOMENTS_MODES:
            raise ValueError(f"moments_mode must be one of {MOMENTS_MODES}")
        if self.periods() <= self.N:
            raise ValueError(
                f"rounded period count p = {self.periods()} must exceed N = {self.N}"
            )

    def periods(self) -> int:
        """p = round(alpha * N), round half up for reproducibility."""
        return int(math.floor(self.alpha * self.N + 0.5))

    def effective_reference_seed(self) -> int:
        return self.base_seed if self.reference_seed is None else self.reference_seed

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "alpha": self.alpha,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "v_spec": self.v_spec.to_dict(),
            "b_spec": self.b_spec.to_dict(),
            "f_spec": self.f_spec.to_dict(),
            "noise_family": self.noise_family,
            "moments_mode": self.moments_mode,
            "reference_seed": self.reference_seed,
        }


@dataclass(frozen=True)
class TrialRecord:
    """Empirical statistics of one trial plus the matching prediction."""

    index: int
    epsilon: float
    q_w: float
    epsilon_or: float
    kappa: float
    q_w_or: float
    prediction: ReplicaPrediction

    def value(self, quantity: str) -> float:
        return getattr(self, quantity)


@dataclass(frozen=True)
class AggregateResult:
    """Sample means and standard errors over trials, with the attached prediction.

    Under ``realized_per_trial`` the attached prediction is the field-wise
    mean of the per-trial predictions, so quenched variability in (v, b) is
    reflected on both sides of the comparison.
    """

    config: TrialConfig
    trials: int
    mean: dict[str, float]
    se: dict[str, float]
    prediction: ReplicaPrediction
    rel_deviation: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "p": self.config.periods(),
            "trials": self.trials,
            "mean": dict(self.mean),
            "se": dict(self.se),
            "prediction": self.prediction.to_dict(),
            "rel_deviation": dict(self.rel_deviation),
        }


def _reference_market(config: TrialConfig) -> tuple[AssetEnsemble, FactorSeries]:
    seed = child_seed(config.effective_reference_seed(), "reference")
    ensemble = sample_ensemble(config.v_spec, config.b_spec, config.N, seed)
    factors = sample_factors(config.f_spec, config.periods(), seed)
    return ensemble, factors


def run_trial(config: TrialConfig, trial_index: int) -> TrialRecord:
    """One sampled market solved exactly; deterministic given (config, index)."""
    if not 0 <= trial_index < config.trials:
        raise ValueError(f"trial_index {trial_index} outside [0, {config.trials})")
    trial_seed = child_seed(config.base_seed, "trial", trial_index)
    if config.moments_mode == "shared_ensemble":
        ensemble, factors = _reference_market(config)
    else:
        ensemble = sample_ensemble(config.v_spec, config.b_spec, config.N, trial_seed)
        factors = sample_factors(config.f_spec, config.periods(), trial_seed)
    alpha_real = factors.n_periods / ensemble.n_assets

    X = generate_returns(ensemble, factors, trial_seed, config.noise_family)
    try:
        realized = minimize_risk(wishart(X))
        baseline = minimize_expected_risk(expected_wishart(ensemble, factors.F, alpha_real))
    except DegenerateMarketError as exc:
        raise DegenerateMarketError(f"trial {trial_index}: {exc}") from exc

    moments = compute_moments(ensemble, factors.F)
    return TrialRecord(
        index=trial_index,
        epsilon=realized.epsilon,
        q_w=realized.q_w,
        epsilon_or=baseline.epsilon,
        kappa=baseline.epsilon / realized.epsilon,
        q_w_or=baseline.q_w,
        prediction=predict(moments, alpha_real),
    )


def _mean_prediction(predictions: Sequence[ReplicaPrediction]) -> ReplicaPrediction:
    fields = {
        name: float(np.mean([getattr(p, name) for p in predictions]))
        for name in PREDICTION_COLUMNS
    }
    return ReplicaPrediction(**fields)


def run_experiment(config: TrialConfig, threads: int | None = None) -> AggregateResult:
    """Means and standard errors over all trials.

    Any trial failure aborts with an :class:`ExperimentFailure` carrying the
    completed records.
    """
    if config.trials < 2:
        raise ValueError("an experiment needs at least 2 trials for standard errors")
    indices = range(config.trials)
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda i: _guarded_trial(config, i), indices))
    else:
        outcomes = [_guarded_trial(config, i) for i in indices]

    records = [r for r in outcomes if isinstance(r, TrialRecord)]
    failures = [f for f in outcomes if not isinstance(f, TrialRecord)]
    if failures:
        raise ExperimentFailure(
            f"{len(failures)} of {config.trials} trials failed; first: {failures[0][1]}",
            completed=records,
            failures=failures,
        )

    records.sort(key=lambda r: r.index)
    mean = {}
    se = {}
    for name in QUANTITIES:
        vals = np.array([r.value(name) for r in records])
        mean[name] = float(vals.mean())
        se[name] = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    prediction = _mean_prediction([r.prediction for r in records])
    rel_dev = {
        name: (mean[name] - _predicted(prediction, name)) / abs(_predicted(prediction, name))
        for name in QUANTITIES
    }
    return AggregateResult(
        config=config,
        trials=len(records),
        mean=mean,
        se=se,
        prediction=prediction,
        rel_deviation=rel_dev,
    )


def _guarded_trial(config: TrialConfig, index: int):
    try:
        return run_trial(config, index)
    except DegenerateMarketError as exc:
        return (index, str(exc))


def _predicted(prediction: ReplicaPrediction, quantity: str) -> float:
    return getattr(prediction, quantity)


@dataclass(frozen=True)
class QuantityVerdict:
    quantity: str
    passed: bool
    mean: float
    se: float
    predicted: float
    rel_deviation: float
    z_score: float
    tolerance: float
    z_max: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "mean": self.mean,
            "se": self.se,
            "predicted": self.predicted,
            "rel_deviation": self.rel_deviation,
            "z_score": self.z_score,
            "tolerance": self.tolerance,
            "z_max": self.z_max,
        }


@dataclass(frozen=True)
class ComparisonReport:
    verdicts: dict[str, QuantityVerdict]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def failed_quantities(self) -> list[str]:
        return [name for name, v in self.verdicts.items() if not v.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "quantities": {name: v.to_dict() for name, v in self.verdicts.items()},
        }


def compare(
    result: AggregateResult,
    tolerances: Mapping[str, float] | None = None,
    z_max: float = DEFAULT_Z_MAX,
) -> ComparisonReport:
    """Per-quantity verdicts: relative deviation and z-score must both pass.

    A zero standard error demands an exact match (the z-score is infinite
    otherwise), which only degenerate configurations produce.
    """
    tol = dict(DEFAULT_TOLERANCES if tolerances is None else tolerances)
    unknown = set(tol) - set(QUANTITIES)
    if unknown:
        raise ValueError(f"unknown quantities in tolerances: {sorted(unknown)}")
    verdicts = {}
    for name, bound in tol.items():
        mean = result.mean[name]
        se = result.se[name]
        predicted = _predicted(result.prediction, name)
        deviation = (mean - predicted) / abs(predicted)
        if mean == predicted:
            z = 0.0
        elif se > 0:
            z = abs(mean - predicted) / se
        else:
            z = math.inf
        verdicts[name] = QuantityVerdict(
            quantity=name,
            passed=(abs(deviation) <= bound and z <= z_max),
            mean=mean,
            se=se,
            predicted=predicted,
            rel_deviation=deviation,
            z_score=z,
            tolerance=bound,
            z_max=z_max,
        )
    return ComparisonReport(verdicts=verdicts)


@dataclass(frozen=True)
class ScanPoint:
    """One grid point of a sweep; ``result`` is None when the point failed."""

    axis: str
    value: float
    config: TrialConfig
    result: AggregateResult | None
    status: str


def _point_config(config: TrialConfig, axis: str, value: float, index: int) -> TrialConfig:
    seed = child_seed(config.base_seed, "scan", axis, index)
    ref = config.effective_reference_seed()
    if axis == "alpha":
        return replace(config, alpha=float(value), base_seed=seed, reference_seed=ref)
    if axis == "N":
        n = int(value)
        if n != value or n < 2:
            raise ValueError(f"N grid values must be integers >= 2, got {value!r}")
        return replace(config, N=n, base_seed=seed, reference_seed=ref)
    if axis == "F_scale":
        if value < 0:
            raise ValueError("F_scale grid values must be nonnegative")
        return replace(
            config,
            f_spec=config.f_spec.scaled(float(value)),
            base_seed=seed,
            reference_seed=ref,
        )
    raise ValueError(f"axis must be one of {SCAN_AXES}")


def scan(
    config: TrialConfig,
    axis: str,
    grid: Sequence[float],
    threads: int | None = None,
) -> list[ScanPoint]:
    """One aggregate per grid point; per-point failures recorded, scan continues."""
    if axis not in SCAN_AXES:
        raise ValueError(f"axis must be one of {SCAN_AXES}")
    if len(grid) == 0:
        raise ValueError("scan grid must be nonempty")
    points = []
    for i, value in enumerate(grid):
        point_cfg = None
        try:
            point_cfg = _point_config(config, axis, value, i)
            result = run_experiment(point_cfg, threads=threads)
            status = "ok"
        except (ExperimentFailure, DegenerateMarketError, ValueError) as exc:
            result = None
            status = f"error: {exc}"
        points.append(
            ScanPoint(
                axis=axis,
                value=float(value),
                config=point_cfg if point_cfg is not None else config,
                result=result,
                status=status,
            )
        )
    return points


def experiment_csv_row(
    config: TrialConfig,
    result: AggregateResult | None,
    status: str = "ok",
) -> list:
    """Row for the fixed experiment CSV layout (see EXPERIMENT_CSV_COLUMNS)."""
    if result is None:
        empty = [""] * 12
        return [config.alpha, config.N, config.periods(), config.trials, *empty, status]
    p = result.prediction
    return [
        config.alpha,
        config.N,
        config.periods(),
        result.trials,
        result.mean["epsilon"],
        result.se["epsilon"],
        p.epsilon,
        result.mean["q_w"],
        result.se["q_w"],
        p.q_w,
        result.mean["epsilon_or"],
        result.se["epsilon_or"],
        p.epsilon_or,
        result.mean["kappa"],
        p.kappa,
        p.q_w_or,
        status,
    ]
