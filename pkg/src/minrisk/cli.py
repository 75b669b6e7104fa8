"""Command-line frontend: predict, experiment, scan, stationarity.

Configuration is a single strict JSON document (unknown keys rejected).
Standard output carries only the machine-readable payload; progress and
errors go to standard error.

Exit codes are a stable contract:
    0  pass
    1  tolerance or diagnostic check failed
    2  configuration error
    3  period ratio at or below 1
    4  degenerate solve
    5  stationarity non-convergence
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

from .distributions import DistributionSpec, SpecError
from .ensemble import analytic_moments, compute_moments, sample_ensemble, sample_factors
from .experiment import (
    DEFAULT_TOLERANCES,
    DEFAULT_Z_MAX,
    EXPERIMENT_CSV_COLUMNS,
    QUANTITIES,
    SCAN_AXES,
    ExperimentFailure,
    TrialConfig,
    compare,
    experiment_csv_row,
    run_experiment,
    scan,
)
from .replica import (
    PREDICTION_COLUMNS,
    StationarityError,
    beta_derivative,
    closed_form_order_parameters,
    free_energy_gradient,
    predict,
    solve_stationary,
)
from .rng import child_seed
from .solver import DegenerateMarketError

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_DEGENERATE = 4
EXIT_NO_CONVERGENCE = 5

GRADIENT_BOUND = 1e-6
BETA_DERIVATIVE_BOUND = 0.01


class ConfigError(ValueError):
    """Configuration file cannot be parsed or validated."""


class RegimeError(ValueError):
    """Period ratio at or below 1."""


_TOP_KEYS = {
    "N",
    "alpha",
    "trials",
    "base_seed",
    "v_spec",
    "b_spec",
    "f_spec",
    "noise_family",
    "moments_mode",
    "moments_source",
    "beta",
    "threads",
    "tolerances",
    "z_max",
    "output_format",
    "output_csv",
    "output_json",
    "scan",
}

_DEFAULTS = {
    "N": 500,
    "trials": 100,
    "base_seed": 0,
    "noise_family": "gaussian",
    "moments_mode": "realized_per_trial",
    "moments_source": "analytic",
    "beta": 1e3,
    "threads": None,
    "z_max": DEFAULT_Z_MAX,
    "output_format": "json",
    "output_csv": None,
    "output_json": None,
}


@dataclass
class RunConfig:
    trial: TrialConfig
    tolerances: dict[str, float]
    z_max: float
    beta: float
    threads: int | None
    moments_source: str
    output_format: str
    output_csv: str | None
    output_json: str | None
    scan_axis: str | None
    scan_grid: list[float] | None


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _number(raw: dict, key: str, default=None):
    val = raw.get(key, default)
    _expect(
        isinstance(val, (int, float)) and not isinstance(val, bool),
        f"key '{key}' must be a number",
    )
    return val


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    _expect(isinstance(raw, dict), "config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _expect(not unknown, f"unknown config keys: {sorted(unknown)}")
    for key in ("alpha", "v_spec", "b_spec", "f_spec"):
        _expect(key in raw, f"missing required key '{key}'")

    alpha = _number(raw, "alpha")
    if alpha <= 1:
        raise RegimeError(f"alpha = {alpha:g} is at or below 1")

    n = _number(raw, "N", _DEFAULTS["N"])
    _expect(isinstance(n, int) and n >= 2, "key 'N' must be an integer >= 2")
    trials = _number(raw, "trials", _DEFAULTS["trials"])
    _expect(isinstance(trials, int) and trials >= 1, "key 'trials' must be a positive integer")
    seed = _number(raw, "base_seed", _DEFAULTS["base_seed"])
    _expect(isinstance(seed, int), "key 'base_seed' must be an integer")

    specs = {}
    for key in ("v_spec", "b_spec", "f_spec"):
        try:
            specs[key] = DistributionSpec.from_dict(raw[key])
        except SpecError as exc:
            raise ConfigError(f"key '{key}': {exc}") from exc

    noise = raw.get("noise_family", _DEFAULTS["noise_family"])
    mode = raw.get("moments_mode", _DEFAULTS["moments_mode"])
    source = raw.get("moments_source", _DEFAULTS["moments_source"])
    _expect(source in ("analytic", "sampled"), "key 'moments_source' must be analytic|sampled")

    beta = _number(raw, "beta", _DEFAULTS["beta"])
    _expect(beta > 0, "key 'beta' must be positive")
    threads = raw.get("threads", _DEFAULTS["threads"])
    _expect(
        threads is None or (isinstance(threads, int) and threads >= 1),
        "key 'threads' must be null or a positive integer",
    )
    z_max = _number(raw, "z_max", _DEFAULTS["z_max"])

    tolerances = dict(DEFAULT_TOLERANCES)
    if "tolerances" in raw:
        _expect(isinstance(raw["tolerances"], dict), "key 'tolerances' must be an object")
        for key, val in raw["tolerances"].items():
            _expect(key in QUANTITIES, f"tolerances: unknown quantity '{key}'")
            _expect(
                isinstance(val, (int, float)) and not isinstance(val, bool) and val >= 0,
                f"tolerances['{key}'] must be a nonnegative number",
            )
            tolerances[key] = float(val)

    fmt = raw.get("output_format", _DEFAULTS["output_format"])
    _expect(fmt in ("csv", "json"), "key 'output_format' must be csv|json")
    out_csv = raw.get("output_csv", _DEFAULTS["output_csv"])
    out_json = raw.get("output_json", _DEFAULTS["output_json"])
    for key, val in (("output_csv", out_csv), ("output_json", out_json)):
        _expect(val is None or isinstance(val, str), f"key '{key}' must be a string path")

    scan_axis = None
    scan_grid = None
    if "scan" in raw:
        section = raw["scan"]
        _expect(isinstance(section, dict), "key 'scan' must be an object")
        extra = set(section) - {"axis", "grid"}
        _expect(not extra, f"scan: unknown keys {sorted(extra)}")
        scan_axis = section.get("axis")
        scan_grid = section.get("grid")
        _expect(scan_axis in SCAN_AXES, f"scan.axis must be one of {SCAN_AXES}")
        _expect(
            isinstance(scan_grid, list)
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in scan_grid),
            "scan.grid must be a list of numbers",
        )

    try:
        trial = TrialConfig(
            N=n,
            alpha=float(alpha),
            v_spec=specs["v_spec"],
            b_spec=specs["b_spec"],
            f_spec=specs["f_spec"],
            trials=trials,
            base_seed=seed,
            noise_family=noise,
            moments_mode=mode,
        )
    except (ValueError, SpecError) as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        trial=trial,
        tolerances=tolerances,
        z_max=float(z_max),
        beta=float(beta),
        threads=threads,
        moments_source=source,
        output_format=fmt,
        output_csv=out_csv,
        output_json=out_json,
        scan_axis=scan_axis,
        scan_grid=scan_grid,
    )


# ----- output helpers ---------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write_file(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _emit(payload: str) -> None:
    sys.stdout.write(payload if payload.endswith("\n") else payload + "\n")


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


# ----- subcommands --------------------------------------------------------------


def _reference_moments(cfg: RunConfig):
    trial = cfg.trial
    seed = child_seed(trial.effective_reference_seed(), "reference")
    ensemble = sample_ensemble(trial.v_spec, trial.b_spec, trial.N, seed)
    factors = sample_factors(trial.f_spec, trial.periods(), seed)
    return compute_moments(ensemble, factors.F)


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    if args.moments:
        cfg.moments_source = args.moments
    if cfg.moments_source == "analytic":
        trial = cfg.trial
        moments = analytic_moments(trial.v_spec, trial.b_spec, trial.f_spec.mean_square())
    else:
        moments = _reference_moments(cfg)
    pred = predict(moments, cfg.trial.alpha)
    if cfg.output_format == "csv":
        payload = _csv_text(PREDICTION_COLUMNS, [[pred.to_dict()[c] for c in PREDICTION_COLUMNS]])
    else:
        payload = json.dumps(pred.to_dict(), indent=2)
    _emit(payload)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    if cfg.trial.trials < 2:
        raise ConfigError("experiments need trials >= 2 for standard errors")
    _progress(
        f"running {cfg.trial.trials} trials at N={cfg.trial.N}, "
        f"alpha={cfg.trial.alpha:g} ({cfg.trial.moments_mode})"
    )
    result = run_experiment(cfg.trial, threads=args.threads or cfg.threads)
    report = compare(result, cfg.tolerances, cfg.z_max)
    status = "ok" if report.passed else "fail:" + ",".join(report.failed_quantities())

    csv_text = _csv_text(EXPERIMENT_CSV_COLUMNS, [experiment_csv_row(cfg.trial, result, status)])
    summary = {
        **result.to_dict(),
        "comparison": report.to_dict(),
        "passed": report.passed,
        "tolerances": cfg.tolerances,
        "z_max": cfg.z_max,
    }
    json_text = json.dumps(summary, indent=2)
    if cfg.output_csv:
        _write_file(cfg.output_csv, csv_text)
    if cfg.output_json:
        _write_file(cfg.output_json, json_text)
    _emit(csv_text if cfg.output_format == "csv" else json_text)
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def _scan_args(cfg: RunConfig, args: argparse.Namespace) -> tuple[str, list[float]]:
    axis = args.axis or cfg.scan_axis
    if args.grid is not None:
        try:
            grid = [float(x) for x in args.grid.split(",") if x.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"--grid: {exc}") from exc
    else:
        grid = cfg.scan_grid
    _expect(axis in SCAN_AXES, f"scan axis must be one of {SCAN_AXES}")
    _expect(bool(grid), "scan grid must be nonempty")
    if axis == "alpha" and any(x <= 1 for x in grid):
        raise RegimeError("alpha grid values must exceed 1")
    if axis == "N":
        _expect(all(float(x).is_integer() and x >= 2 for x in grid), "N grid must be integers >= 2")
    if axis == "F_scale":
        _expect(all(x >= 0 for x in grid), "F_scale grid must be nonnegative")
    return axis, [float(x) for x in grid]


def cmd_scan(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    if cfg.trial.trials < 2:
        raise ConfigError("experiments need trials >= 2 for standard errors")
    axis, grid = _scan_args(cfg, args)
    _progress(f"scanning {axis} over {grid} with {cfg.trial.trials} trials per point")
    points = scan(cfg.trial, axis, grid, threads=args.threads or cfg.threads)

    rows = []
    summaries = []
    all_passed = True
    for point in points:
        if point.result is None:
            all_passed = False
            rows.append(experiment_csv_row(point.config, None, point.status))
            summaries.append({"axis": axis, "value": point.value, "status": point.status})
            continue
        report = compare(point.result, cfg.tolerances, cfg.z_max)
        status = "ok" if report.passed else "fail:" + ",".join(report.failed_quantities())
        all_passed = all_passed and report.passed
        rows.append(experiment_csv_row(point.config, point.result, status))
        summaries.append(
            {
                "axis": axis,
                "value": point.value,
                "status": status,
                **point.result.to_dict(),
                "comparison": report.to_dict(),
            }
        )

    csv_text = _csv_text(EXPERIMENT_CSV_COLUMNS, rows)
    json_text = json.dumps(
        {"axis": axis, "grid": grid, "points": summaries, "passed": all_passed}, indent=2
    )
    if cfg.output_csv:
        _write_file(cfg.output_csv, csv_text)
    if cfg.output_json:
        _write_file(cfg.output_json, json_text)
    _emit(csv_text if cfg.output_format == "csv" else json_text)
    return EXIT_OK if all_passed else EXIT_TOLERANCE


def cmd_stationarity(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    beta = args.beta if args.beta is not None else cfg.beta
    if beta <= 0:
        raise ConfigError("beta must be positive")
    moments = _reference_moments(cfg)
    alpha = cfg.trial.alpha
    _progress(f"solving stationarity at beta={beta:g}, alpha={alpha:g}, N={cfg.trial.N}")

    theta = solve_stationary(moments, alpha, beta)
    gradient = free_energy_gradient(theta, moments, alpha, beta)
    grad_max = float(max(abs(g) for g in gradient))
    closed = closed_form_order_parameters(moments, alpha, beta)
    gaps = {
        name: getattr(theta, name) - getattr(closed, name)
        for name in ("chi_w", "q_w", "chi_s", "q_s", "m")
    }
    pred = predict(moments, alpha)
    derivative = beta_derivative(moments, alpha, beta)
    rel_error = abs(derivative - pred.epsilon) / pred.epsilon

    gradient_ok = grad_max <= GRADIENT_BOUND
    derivative_ok = rel_error <= BETA_DERIVATIVE_BOUND
    diagnostic = {
        "alpha": alpha,
        "beta": beta,
        "gradient_max_abs": grad_max,
        "gradient": list(map(float, gradient)),
        "closed_form_gaps": gaps,
        "beta_derivative": derivative,
        "epsilon_predicted": pred.epsilon,
        "beta_derivative_rel_error": rel_error,
        "checks": {"gradient": gradient_ok, "beta_derivative": derivative_ok},
        "passed": gradient_ok and derivative_ok,
    }
    _emit(json.dumps(diagnostic, indent=2))
    return EXIT_OK if gradient_ok and derivative_ok else EXIT_TOLERANCE


# ----- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minrisk",
        description="Minimum-risk portfolios under a single-factor market: "
        "predictions and finite-size verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_predict = sub.add_parser("predict", help="print the closed-form predictions")
    p_predict.add_argument("config")
    p_predict.add_argument("--moments", choices=("analytic", "sampled"), default=None)
    p_predict.set_defaults(func=cmd_predict)

    p_exp = sub.add_parser("experiment", help="Monte Carlo experiment vs predictions")
    p_exp.add_argument("config")
    p_exp.add_argument("--threads", type=int, default=None)
    p_exp.set_defaults(func=cmd_experiment)

    p_scan = sub.add_parser("scan", help="sweep alpha, N, or the factor scale")
    p_scan.add_argument("config")
    p_scan.add_argument("--axis", choices=SCAN_AXES, default=None)
    p_scan.add_argument("--grid", default=None, help="comma-separated grid values")
    p_scan.add_argument("--threads", type=int, default=None)
    p_scan.set_defaults(func=cmd_scan)

    p_stat = sub.add_parser("stationarity", help="free-energy stationarity diagnostics")
    p_stat.add_argument("config")
    p_stat.add_argument("--beta", type=float, default=None)
    p_stat.set_defaults(func=cmd_stationarity)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecError) as exc:
        _progress(f"config error: {exc}")
        return EXIT_CONFIG
    except RegimeError as exc:
        _progress(f"regime error: {exc}")
        return EXIT_REGIME
    except StationarityError as exc:
        _progress(f"stationarity failure: {exc}")
        _progress(f"residuals: {list(map(float, exc.residuals))}")
        return EXIT_NO_CONVERGENCE
    except ExperimentFailure as exc:
        _progress(f"experiment aborted: {exc}")
        _progress(f"completed trials: {len(exc.completed)}")
        return EXIT_DEGENERATE
    except DegenerateMarketError as exc:
        _progress(f"degenerate solve: {exc}")
        return EXIT_DEGENERATE


def main() -> None:
    sys.exit(run())
