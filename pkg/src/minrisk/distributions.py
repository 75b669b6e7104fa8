"""Scalar distribution families for residual variances, factor loadings, and factors.

Families and their parameters:

    constant      value
    two_point     value_a, value_b, prob_a
    uniform       lo, hi
    gaussian      mean, sd
    lognormal     log_mean, log_sd          (exp of a gaussian; support (0, inf))
    ar1_gaussian  innovation_sd, autocorrelation   (factor series only)

A spec is role-agnostic at construction; role constraints (strictly positive
support for residual variances, zero analytic mean for the factor series, no
serial families for per-asset draws) are enforced at the point of use, where
the role is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

FAMILIES = ("constant", "two_point", "uniform", "gaussian", "lognormal", "ar1_gaussian")

_PARAM_NAMES: dict[str, tuple[str, ...]] = {
    "constant": ("value",),
    "two_point": ("value_a", "value_b", "prob_a"),
    "uniform": ("lo", "hi"),
    "gaussian": ("mean", "sd"),
    "lognormal": ("log_mean", "log_sd"),
    "ar1_gaussian": ("innovation_sd", "autocorrelation"),
}


class SpecError(ValueError):
    """Invalid distribution family, parameters, or role."""


@dataclass(frozen=True)
class DistributionSpec:
    """One scalar distribution, identified by family name plus parameters.

    Construct through the family classmethods (``DistributionSpec.gaussian(0, 1)``)
    or from a tagged record via :meth:`from_dict`.
    """

    family: str
    params: dict[str, float]

    def __post_init__(self) -> None:
        if self.family not in _PARAM_NAMES:
            raise SpecError(f"unknown distribution family '{self.family}'")
        expected = _PARAM_NAMES[self.family]
        if sorted(self.params) != sorted(expected):
            raise SpecError(
                f"{self.family} expects params {sorted(expected)}, got {sorted(self.params)}"
            )
        clean = {}
        for name, val in self.params.items():
            if isinstance(val, bool) or not isinstance(val, (int, float, np.floating, np.integer)):
                raise SpecError(f"{self.family}.{name} must be a number")
            val = float(val)
            if not math.isfinite(val):
                raise SpecError(f"{self.family}.{name} must be finite")
            clean[name] = val
        p = clean
        if self.family == "two_point" and not 0.0 <= p["prob_a"] <= 1.0:
            raise SpecError("two_point.prob_a must lie in [0, 1]")
        if self.family == "uniform" and not p["lo"] < p["hi"]:
            raise SpecError("uniform requires lo < hi")
        if self.family == "gaussian" and p["sd"] <= 0:
            raise SpecError("gaussian.sd must be positive")
        if self.family == "lognormal" and p["log_sd"] <= 0:
            raise SpecError("lognormal.log_sd must be positive")
        if self.family == "ar1_gaussian":
            if p["innovation_sd"] <= 0:
                raise SpecError("ar1_gaussian.innovation_sd must be positive")
            if abs(p["autocorrelation"]) >= 1.0:
                raise SpecError("ar1_gaussian requires |autocorrelation| < 1")
        object.__setattr__(self, "params", clean)

    # ----- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "DistributionSpec":
        return cls("constant", {"value": value})

    @classmethod
    def two_point(cls, value_a: float, value_b: float, prob_a: float) -> "DistributionSpec":
        return cls("two_point", {"value_a": value_a, "value_b": value_b, "prob_a": prob_a})

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "DistributionSpec":
        return cls("uniform", {"lo": lo, "hi": hi})

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "DistributionSpec":
        return cls("gaussian", {"mean": mean, "sd": sd})

    @classmethod
    def lognormal(cls, log_mean: float, log_sd: float) -> "DistributionSpec":
        return cls("lognormal", {"log_mean": log_mean, "log_sd": log_sd})

    @classmethod
    def ar1_gaussian(cls, innovation_sd: float, autocorrelation: float) -> "DistributionSpec":
        return cls(
            "ar1_gaussian",
            {"innovation_sd": innovation_sd, "autocorrelation": autocorrelation},
        )

    # ----- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` independent values (serial families have no iid form)."""
        p = self.params
        if self.family == "constant":
            return np.full(n, p["value"])
        if self.family == "two_point":
            return np.where(rng.random(n) < p["prob_a"], p["value_a"], p["value_b"])
        if self.family == "uniform":
            return rng.uniform(p["lo"], p["hi"], n)
        if self.family == "gaussian":
            return rng.normal(p["mean"], p["sd"], n)
        if self.family == "lognormal":
            return rng.lognormal(p["log_mean"], p["log_sd"], n)
        raise SpecError("ar1_gaussian draws form a series; use sample_series")

    def sample_series(self, rng: np.random.Generator, length: int) -> np.ndarray:
        """Draw a length-``length`` series; ar1 starts from its stationary law."""
        if self.family != "ar1_gaussian":
            return self.sample(rng, length)
        sd = self.params["innovation_sd"]
        rho = self.params["autocorrelation"]
        f = np.empty(length)
        f[0] = rng.normal(0.0, sd / math.sqrt(1.0 - rho * rho))
        innov = rng.normal(0.0, sd, length - 1)
        for t in range(1, length):
            f[t] = rho * f[t - 1] + innov[t - 1]
        return f

    # ----- analytic moments --------------------------------------------------

    def mean(self) -> float:
        p = self.params
        if self.family == "constant":
            return p["value"]
        if self.family == "two_point":
            return p["prob_a"] * p["value_a"] + (1.0 - p["prob_a"]) * p["value_b"]
        if self.family == "uniform":
            return 0.5 * (p["lo"] + p["hi"])
        if self.family == "gaussian":
            return p["mean"]
        if self.family == "lognormal":
            return math.exp(p["log_mean"] + 0.5 * p["log_sd"] ** 2)
        return 0.0  # ar1_gaussian

    def mean_square(self) -> float:
        p = self.params
        if self.family == "constant":
            return p["value"] ** 2
        if self.family == "two_point":
            return p["prob_a"] * p["value_a"] ** 2 + (1.0 - p["prob_a"]) * p["value_b"] ** 2
        if self.family == "uniform":
            return (p["lo"] ** 2 + p["lo"] * p["hi"] + p["hi"] ** 2) / 3.0
        if self.family == "gaussian":
            return p["mean"] ** 2 + p["sd"] ** 2
        if self.family == "lognormal":
            return math.exp(2.0 * p["log_mean"] + 2.0 * p["log_sd"] ** 2)
        return p["innovation_sd"] ** 2 / (1.0 - p["autocorrelation"] ** 2)

    def variance(self) -> float:
        return self.mean_square() - self.mean() ** 2

    def inv_mean(self) -> float:
        """E[1/X]; defined for positive-support families only."""
        self.require_positive_support("inv_mean")
        p = self.params
        if self.family == "constant":
            return 1.0 / p["value"]
        if self.family == "two_point":
            return p["prob_a"] / p["value_a"] + (1.0 - p["prob_a"]) / p["value_b"]
        if self.family == "uniform":
            return math.log(p["hi"] / p["lo"]) / (p["hi"] - p["lo"])
        return math.exp(-p["log_mean"] + 0.5 * p["log_sd"] ** 2)  # lognormal

    def inv_sq_mean(self) -> float:
        """E[1/X^2]; defined for positive-support families only."""
        self.require_positive_support("inv_sq_mean")
        p = self.params
        if self.family == "constant":
            return 1.0 / p["value"] ** 2
        if self.family == "two_point":
            return p["prob_a"] / p["value_a"] ** 2 + (1.0 - p["prob_a"]) / p["value_b"] ** 2
        if self.family == "uniform":
            return 1.0 / (p["lo"] * p["hi"])
        return math.exp(-2.0 * p["log_mean"] + 2.0 * p["log_sd"] ** 2)  # lognormal

    # ----- role checks -------------------------------------------------------

    def has_positive_support(self) -> bool:
        p = self.params
        if self.family == "constant":
            return p["value"] > 0
        if self.family == "two_point":
            return p["value_a"] > 0 and p["value_b"] > 0
        if self.family == "uniform":
            return p["lo"] > 0
        return self.family == "lognormal"

    def require_positive_support(self, role: str = "residual variance") -> None:
        if not self.has_positive_support():
            raise SpecError(
                f"{role} requires support strictly inside (0, inf); "
                f"this {self.family} spec does not qualify"
            )

    def require_zero_mean(self, role: str = "factor series") -> None:
        if self.family == "ar1_gaussian":
            return
        mu = self.mean()
        scale = math.sqrt(max(self.mean_square(), 1.0))
        if abs(mu) > 1e-12 * scale:
            raise SpecError(f"{role} requires analytic mean 0; {self.family} spec has mean {mu:g}")

    # ----- transforms and serialization --------------------------------------

    def scaled(self, c: float) -> "DistributionSpec":
        """Spec of c*X for c >= 0; c = 0 collapses every family to constant(0)."""
        if c < 0:
            raise SpecError("scale factor must be nonnegative")
        if c == 0:
            return DistributionSpec.constant(0.0)
        p = self.params
        if self.family == "constant":
            return DistributionSpec.constant(c * p["value"])
        if self.family == "two_point":
            return DistributionSpec.two_point(c * p["value_a"], c * p["value_b"], p["prob_a"])
        if self.family == "uniform":
            return DistributionSpec.uniform(c * p["lo"], c * p["hi"])
        if self.family == "gaussian":
            return DistributionSpec.gaussian(c * p["mean"], c * p["sd"])
        if self.family == "lognormal":
            return DistributionSpec.lognormal(p["log_mean"] + math.log(c), p["log_sd"])
        return DistributionSpec.ar1_gaussian(c * p["innovation_sd"], p["autocorrelation"])

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, record: Mapping) -> "DistributionSpec":
        """Parse a tagged record {"family": ..., <params>}; unknown keys rejected."""
        if not isinstance(record, Mapping):
            raise SpecError("distribution spec must be an object")
        rec = dict(record)
        family = rec.pop("family", None)
        if family is None:
            raise SpecError("distribution spec needs a 'family' key")
        if family not in _PARAM_NAMES:
            raise SpecError(f"unknown distribution family '{family}'")
        expected = set(_PARAM_NAMES[family])
        got = set(rec)
        if got != expected:
            parts = []
            if expected - got:
                parts.append(f"missing {sorted(expected - got)}")
            if got - expected:
                parts.append(f"unknown {sorted(got - expected)}")
            raise SpecError(f"{family} spec: " + ", ".join(parts))
        return cls(family, rec)
