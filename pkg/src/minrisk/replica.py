"""Closed-form predictions for the minimum-risk portfolio, and the finite-beta
free-energy diagnostics they derive from.

For period ratio alpha = p/N > 1 and ensemble averages from
:class:`~minrisk.ensemble.EnsembleMoments`:

    epsilon    = (alpha - 1) / (2 <v^-1>) + (alpha - 1)/2 * F m m1
    q_w        = (1 + F m m1 <v^-1>) / (alpha - 1) + C
    q_s        = 1/<v^-1> + F^2 m^2 V1 <v^-1> + (1/<v^-1> + F m m1) / (alpha - 1)
    beta chi_w = <v^-1> / (alpha - 1)
    beta chi_s = 1 / (alpha - 1)
    epsilon_or = alpha / (2 <v^-1>) + alpha/2 * F m m1
    kappa      = epsilon_or / epsilon = alpha / (alpha - 1)
    q_w_or     = C

The free energy kept here is the replica-symmetric extremand over the eleven
order parameters Theta = (k, m, h, chi_w, q_w, chi_w~, q_w~, chi_s, q_s,
chi_s~, q_s~), evaluated with finite-size empirical averages over the
realized (v, b) arrays.  The conjugate parameters and the budget multipliers
have no published closed form; solving their stationarity conditions (linear
or rational given the direct parameters) yields

    chi_w~ = q_w~ = 0
    chi_s~ = beta (alpha - 1)
    q_s~   = beta^2 (alpha - 1)^2 (q_s + F m^2) / alpha
    k      = 2 beta epsilon
    h      = -beta (alpha - 1) F m

which :func:`solve_stationary` uses as its starting point before polishing
the full gradient system numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .ensemble import EnsembleMoments

__all__ = [
    "ReplicaPrediction",
    "OrderParameterSet",
    "StationarityError",
    "PARAM_ORDER",
    "PREDICTION_COLUMNS",
    "predict",
    "predict_independent",
    "factor_gain",
    "free_energy",
    "free_energy_gradient",
    "closed_form_order_parameters",
    "solve_stationary",
    "beta_derivative",
]

PREDICTION_COLUMNS = (
    "alpha",
    "epsilon",
    "q_w",
    "q_s",
    "beta_chi_w",
    "beta_chi_s",
    "epsilon_or",
    "kappa",
    "q_w_or",
)

PARAM_ORDER = (
    "k",
    "m",
    "h",
    "chi_w",
    "q_w",
    "chi_w_tilde",
    "q_w_tilde",
    "chi_s",
    "q_s",
    "chi_s_tilde",
    "q_s_tilde",
)

# natural magnitude of each order parameter as a power of beta, used to keep
# the stationarity system O(1) regardless of beta
_BETA_POWER = np.array([1, 0, 1, -1, 0, 1, 2, -1, 0, 1, 2], dtype=float)


class StationarityError(RuntimeError):
    """Stationarity solve did not converge; carries the residual vector."""

    def __init__(self, message: str, residuals: np.ndarray):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class ReplicaPrediction:
    """Large-size predictions for one (moments, alpha) pair."""

    alpha: float
    epsilon: float
    q_w: float
    q_s: float
    beta_chi_w: float
    beta_chi_s: float
    epsilon_or: float
    kappa: float
    q_w_or: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PREDICTION_COLUMNS}


@dataclass(frozen=True)
class OrderParameterSet:
    """The eleven order parameters of the free energy."""

    k: float
    m: float
    h: float
    chi_w: float
    q_w: float
    chi_w_tilde: float
    q_w_tilde: float
    chi_s: float
    q_s: float
    chi_s_tilde: float
    q_s_tilde: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_ORDER])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "OrderParameterSet":
        return cls(**{name: float(val) for name, val in zip(PARAM_ORDER, x)})


def _check_alpha(alpha: float) -> None:
    if not alpha > 1:
        raise ValueError(
            f"alpha = {alpha:g} is at or below 1: the optimum is not uniquely "
            "determined in that regime"
        )


def predict(moments: EnsembleMoments, alpha: float) -> ReplicaPrediction:
    """Full set of closed-form predictions at period ratio alpha > 1."""
    _check_alpha(alpha)
    gain = moments.F * moments.m * moments.m1
    inv_v = moments.inv_v
    epsilon = (alpha - 1.0) / (2.0 * inv_v) + 0.5 * (alpha - 1.0) * gain
    q_w = (1.0 + gain * inv_v) / (alpha - 1.0) + moments.C
    q_s = (
        1.0 / inv_v
        + moments.F**2 * moments.m**2 * moments.V1 * inv_v
        + (1.0 / inv_v + gain) / (alpha - 1.0)
    )
    pred = ReplicaPrediction(
        alpha=float(alpha),
        epsilon=epsilon,
        q_w=q_w,
        q_s=q_s,
        beta_chi_w=inv_v / (alpha - 1.0),
        beta_chi_s=1.0 / (alpha - 1.0),
        epsilon_or=alpha / (2.0 * inv_v) + 0.5 * alpha * gain,
        kappa=alpha / (alpha - 1.0),
        q_w_or=moments.C,
    )
    if not pred.epsilon > 0:
        raise ValueError("predicted risk must be positive; moments are inconsistent")
    if pred.q_w < 1.0 - 1e-9:
        raise ValueError(
            "predicted concentration falls below the equal-weight floor of 1; "
            "moments are not realizable by any ensemble"
        )
    return pred


def predict_independent(moments: EnsembleMoments, alpha: float) -> tuple[float, float]:
    """(epsilon, q_w) for uncorrelated returns: the loadings are ignored."""
    _check_alpha(alpha)
    epsilon = (alpha - 1.0) / (2.0 * moments.inv_v)
    q_w = 1.0 / (alpha - 1.0) + moments.inv_v2 / moments.inv_v**2
    return epsilon, q_w


def factor_gain(moments: EnsembleMoments) -> float:
    """Common-factor contribution F m m1 to the per-asset risk.

    Nondecreasing in F: zero at F = 0, saturating at m1^2 / (V1 <v^-1>)
    when V1 > 0.
    """
    return moments.F * moments.m * moments.m1


def _arrays(moments: EnsembleMoments) -> tuple[np.ndarray, np.ndarray]:
    if moments.source is None:
        raise ValueError(
            "free-energy averages need the realized (v, b) arrays; "
            "build the moments with compute_moments over a concrete ensemble"
        )
    return moments.source.v, moments.source.b


def free_energy(
    theta: OrderParameterSet,
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
) -> float:
    """Replica-symmetric extremand at the given order parameters.

    Ensemble averages run over the realized (v, b) arrays attached to the
    moments.  Raises on domain violations (nonpositive logarithm arguments).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    v, b = _arrays(moments)
    F = moments.F
    bs = 1.0 + beta * theta.chi_s
    if bs <= 0:
        raise ValueError("1 + beta*chi_s must be positive")
    D = theta.chi_w_tilde + v * theta.chi_s_tilde
    if np.any(D <= 0):
        raise ValueError("chi_w_tilde + v*chi_s_tilde must be positive over the ensemble")
    lin = theta.k + b * theta.h
    A = theta.q_w_tilde + v * theta.q_s_tilde + lin**2
    return float(
        -theta.k
        - theta.h * theta.m
        + 0.5 * (theta.chi_w + theta.q_w) * (theta.chi_w_tilde - theta.q_w_tilde)
        + 0.5 * theta.q_w * theta.q_w_tilde
        + 0.5 * (theta.chi_s + theta.q_s) * (theta.chi_s_tilde - theta.q_s_tilde)
        + 0.5 * theta.q_s * theta.q_s_tilde
        - 0.5 * alpha * math.log(bs)
        - 0.5 * alpha * beta * (theta.q_s + F * theta.m**2) / bs
        - 0.5 * float(np.mean(np.log(D)))
        + 0.5 * float(np.mean(A / D))
    )


def free_energy_gradient(
    theta: OrderParameterSet,
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """Analytic gradient of :func:`free_energy`, ordered per PARAM_ORDER."""
    g, _ = _gradient_and_scales(theta, moments, alpha, beta)
    return g


def _gradient_and_scales(
    theta: OrderParameterSet,
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient plus, per component, the magnitude of its constituent terms.

    The scales feed the relative convergence test: a component is numerically
    stationary when it is small against the terms that cancel to produce it.
    """
    v, b = _arrays(moments)
    F = moments.F
    bs = 1.0 + beta * theta.chi_s
    if bs <= 0:
        raise ValueError("1 + beta*chi_s must be positive")
    D = theta.chi_w_tilde + v * theta.chi_s_tilde
    if np.any(D <= 0):
        raise ValueError("chi_w_tilde + v*chi_s_tilde must be positive over the ensemble")
    lin = theta.k + b * theta.h
    A = theta.q_w_tilde + v * theta.q_s_tilde + lin**2

    mean_inv_d = float(np.mean(1.0 / D))
    mean_v_inv_d = float(np.mean(v / D))
    mean_lin_d = float(np.mean(lin / D))
    mean_blin_d = float(np.mean(b * lin / D))
    mean_a_d2 = float(np.mean(A / D**2))
    mean_va_d2 = float(np.mean(v * A / D**2))

    sat = alpha * beta / bs
    sat2 = alpha * beta**2 * (theta.q_s + F * theta.m**2) / bs**2

    g = np.empty(11)
    s = np.empty(11)
    terms: list[tuple[float, ...]] = [
        (-1.0, mean_lin_d),  # k
        (-theta.h, -beta * alpha * F * theta.m / bs),  # m
        (-theta.m, mean_blin_d),  # h
        (0.5 * theta.chi_w_tilde, -0.5 * theta.q_w_tilde),  # chi_w
        (0.5 * theta.chi_w_tilde,),  # q_w
        (
            0.5 * (theta.chi_w + theta.q_w),
            -0.5 * mean_inv_d,
            -0.5 * mean_a_d2,
        ),  # chi_w_tilde
        (0.5 * mean_inv_d, -0.5 * theta.chi_w),  # q_w_tilde
        (
            0.5 * (theta.chi_s_tilde - theta.q_s_tilde),
            -0.5 * sat,
            0.5 * sat2,
        ),  # chi_s
        (0.5 * theta.chi_s_tilde, -0.5 * sat),  # q_s
        (
            0.5 * (theta.chi_s + theta.q_s),
            -0.5 * mean_v_inv_d,
            -0.5 * mean_va_d2,
        ),  # chi_s_tilde
        (0.5 * mean_v_inv_d, -0.5 * theta.chi_s),  # q_s_tilde
    ]
    for i, t in enumerate(terms):
        g[i] = sum(t)
        s[i] = sum(abs(x) for x in t)
    return g, s


def closed_form_order_parameters(
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
) -> OrderParameterSet:
    """Stationary point assembled from the closed forms (module docstring)."""
    _check_alpha(alpha)
    if beta <= 0:
        raise ValueError("beta must be positive")
    pred = predict(moments, alpha)
    ts = beta * (alpha - 1.0)
    return OrderParameterSet(
        k=2.0 * beta * pred.epsilon,
        m=moments.m,
        h=-ts * moments.F * moments.m,
        chi_w=moments.inv_v / ts,
        q_w=pred.q_w,
        chi_w_tilde=0.0,
        q_w_tilde=0.0,
        chi_s=1.0 / ts,
        q_s=pred.q_s,
        chi_s_tilde=ts,
        q_s_tilde=ts**2 * (pred.q_s + moments.F * moments.m**2) / alpha,
    )


def _scaled_residuals(
    x: np.ndarray,
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
    scale: np.ndarray,
) -> np.ndarray:
    """Recombined O(1) stationarity residuals at scaled coordinates x.

    Mixed beta powers in the raw gradient would otherwise swamp the solver's
    step control; the recombinations below have exactly the same root set.
    """
    theta = OrderParameterSet.from_array(x * scale)
    try:
        g, _ = _gradient_and_scales(theta, moments, alpha, beta)
    except ValueError:
        return np.full(11, 1e6)
    r = np.empty(11)
    r[0] = g[0]
    r[1] = g[1] / beta
    r[2] = g[2]
    r[3] = 2.0 * g[4] / beta  # chi_w_tilde / beta
    r[4] = 2.0 * (g[4] - g[3]) / beta**2  # q_w_tilde / beta^2
    r[5] = 2.0 * g[5]
    r[6] = 2.0 * beta * g[6]
    r[7] = 2.0 * g[8] / beta  # chi_s_tilde/beta - alpha/(1 + beta chi_s)
    r[8] = 2.0 * (g[7] - g[8]) / beta**2
    r[9] = 2.0 * g[9]
    r[10] = 2.0 * beta * g[10]
    return r


def solve_stationary(
    moments: EnsembleMoments,
    alpha: float,
    beta: float = 1e3,
    init: OrderParameterSet | None = None,
    grad_tol: float = 1e-6,
    rel_tol: float = 1e-8,
    maxfev: int | None = None,
) -> OrderParameterSet:
    """Order parameters at which the free-energy gradient vanishes.

    Starts from the closed forms (or ``init``), then polishes the full
    eleven-equation system with a root finder in beta-scaled coordinates.
    Convergence requires the gradient to be below ``grad_tol`` in max norm
    and below ``rel_tol`` relative to the terms composing each component.
    """
    _check_alpha(alpha)
    if beta <= 0:
        raise ValueError("beta must be positive")
    _arrays(moments)  # fail early when realized arrays are missing
    start = init if init is not None else closed_form_order_parameters(moments, alpha, beta)
    scale = beta**_BETA_POWER
    x0 = start.as_array() / scale
    sol = scipy.optimize.root(
        _scaled_residuals,
        x0,
        args=(moments, alpha, beta, scale),
        method="hybr",
        options={"xtol": 1e-13, **({"maxfev": maxfev} if maxfev else {})},
    )
    theta = OrderParameterSet.from_array(sol.x * scale)
    g, s = _gradient_and_scales(theta, moments, alpha, beta)
    rel = np.abs(g) / np.maximum(1.0, s)
    if float(np.abs(g).max()) > grad_tol or float(rel.max()) > rel_tol:
        raise StationarityError(
            f"stationarity not reached: max|grad| = {np.abs(g).max():.3e}, "
            f"max relative residual = {rel.max():.3e}",
            residuals=g,
        )
    return theta


def beta_derivative(
    moments: EnsembleMoments,
    alpha: float,
    beta: float,
    rel_step: float = 0.05,
) -> float:
    """-d(phi*)/d(beta) by central differences, re-extremizing at beta(1 +/- h).

    Converges to the predicted per-asset risk as beta grows; the leading
    finite-beta correction is +1/(2 beta).
    """
    if not 0 < rel_step < 0.5:
        raise ValueError("rel_step must lie in (0, 0.5)")
    delta = beta * rel_step
    values = []
    for bval in (beta + delta, beta - delta):
        theta = solve_stationary(moments, alpha, bval)
        values.append(free_energy(theta, moments, alpha, bval))
    return -(values[0] - values[1]) / (2.0 * delta)
