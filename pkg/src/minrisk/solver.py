"""Exact minimization of the quadratic investment risk under the budget constraint.

The unique stationary point of (1/2) w^T J w subject to sum(w) = N solves
J w = k 1 for a scalar multiplier k, giving

    w* = N J^{-1} 1 / (1^T J^{-1} 1),    epsilon = w*^T J w* / (2N),
    q_w = w*^T w* / N.

Positive definite J only.  Near-singular inputs fail loudly instead of being
regularized, because they signal the period-poor regime where the minimum
degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .market import RiskMatrix

__all__ = [
    "Portfolio",
    "SolveReport",
    "DegenerateMarketError",
    "minimize_risk",
    "minimize_expected_risk",
    "investment_risk",
]

KKT_TOL = 1e-8
BUDGET_TOL = 1e-10


class DegenerateMarketError(RuntimeError):
    """Risk matrix is singular or indefinite (period ratio at or below 1)."""


@dataclass(frozen=True)
class Portfolio:
    """Portfolio weights normalized so they sum to the asset count."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        n = w.size
        if abs(float(w.sum()) - n) > BUDGET_TOL * n:
            raise ValueError("weights violate the budget constraint sum(w) = N")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n_assets(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class SolveReport:
    """Exact optimum with its empirical statistics and KKT residuals."""

    portfolio: Portfolio
    epsilon: float
    q_w: float
    multiplier: float
    kkt_residual: float
    budget_residual: float

    def __post_init__(self) -> None:
        if self.kkt_residual > KKT_TOL * (1.0 + abs(self.multiplier)):
            raise DegenerateMarketError(
                f"stationarity residual {self.kkt_residual:.3e} exceeds the bound; "
                "matrix too ill-conditioned for a trustworthy solve"
            )

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "q_w": self.q_w,
            "multiplier": self.multiplier,
            "kkt_residual": self.kkt_residual,
            "budget_residual": self.budget_residual,
            "weights": self.portfolio.w.tolist(),
        }


def _kkt_solve(J: RiskMatrix) -> SolveReport:
    a = J.entries
    n = a.shape[0]
    try:
        cho = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateMarketError(
            "risk matrix is not positive definite (period ratio at or below 1, "
            "or a degenerate sample)"
        ) from exc
    ones = np.ones(n)
    u = scipy.linalg.cho_solve(cho, ones, check_finite=False)
    s = float(ones @ u)
    if not np.isfinite(s) or s <= 0:
        raise DegenerateMarketError("risk matrix solve produced a nonpositive normalization")
    w = (n / s) * u
    k = n / s
    r = a @ w - k
    if float(np.abs(r).max()) > KKT_TOL * (1.0 + abs(k)):
        # one refinement pass, then renormalize the budget
        w = w - scipy.linalg.cho_solve(cho, r, check_finite=False)
        w *= n / float(w.sum())
        k = float(ones @ (a @ w)) / n
        r = a @ w - k
    jw = a @ w
    return SolveReport(
        portfolio=Portfolio(w=w),
        epsilon=float(w @ jw) / (2.0 * n),
        q_w=float(w @ w) / n,
        multiplier=k,
        kkt_residual=float(np.abs(r).max()),
        budget_residual=abs(float(w.sum()) - n),
    )


def minimize_risk(J: RiskMatrix) -> SolveReport:
    """Minimize the realized investment risk over budget-feasible portfolios."""
    return _kkt_solve(J)


def minimize_expected_risk(EJ: RiskMatrix) -> SolveReport:
    """Same KKT solve applied to the expectation of the risk matrix.

    This is the baseline strategy that optimizes against E[J] instead of the
    realized sample.
    """
    return _kkt_solve(EJ)


def investment_risk(portfolio: Portfolio, J: RiskMatrix) -> float:
    """Per-asset risk w^T J w / (2N) of an arbitrary feasible portfolio."""
    w = portfolio.w
    if w.size != J.n_assets:
        raise ValueError(f"dimension mismatch: {w.size} weights vs {J.n_assets} assets")
    return float(w @ (J.entries @ w)) / (2.0 * w.size)
