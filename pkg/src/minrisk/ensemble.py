"""Asset ensembles, factor series, and the scalar averages behind the closed forms.

With <.> the empirical average over assets, the tilted loading statistics are

    m1 = <v^-1 b> / <v^-1>        V1 = <v^-1 (b - m1)^2> / <v^-1>
    m2 = <v^-2 b> / <v^-2>        V2 = <v^-2 (b - m2)^2> / <v^-2>
    m  = m1 / (1 + F V1 <v^-1>)
    C  = F^2 m^2 V2 <v^-2> + (<v^-2> / <v^-1>^2) (1 + F m (m1 - m2) <v^-1>)^2

where F is the mean square of the factor series.  The centered forms of V1
and V2 are algebraically identical to the raw-moment definitions but stay
nonnegative in floating point.

Averages are taken over the realized finite-size arrays, so correlated or
non-identically-distributed loadings are handled uniformly; for the closed
families an analytic mode (:func:`analytic_moments`) is available for
convergence studies and desk checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, SpecError
from .rng import stream

__all__ = [
    "AssetEnsemble",
    "FactorSeries",
    "EnsembleMoments",
    "sample_ensemble",
    "sample_factors",
    "compute_F",
    "compute_moments",
    "analytic_moments",
]


@dataclass(frozen=True)
class AssetEnsemble:
    """Realized per-asset residual variances ``v`` and factor loadings ``b``."""

    v: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.v, dtype=float)
        b = np.array(self.b, dtype=float)
        if v.ndim != 1 or b.ndim != 1 or v.shape != b.shape:
            raise ValueError("v and b must be 1-d arrays of equal length")
        if v.size < 2:
            raise ValueError("an ensemble needs at least two assets")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(b))):
            raise ValueError("v and b must be finite")
        if not np.all(v > 0):
            raise ValueError("residual variances must be strictly positive")
        v.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "b", b)

    @property
    def n_assets(self) -> int:
        return self.v.size


@dataclass(frozen=True)
class FactorSeries:
    """Realized factor values ``f`` and their mean square ``F``.

    ``F`` is always the mean square of the stored series; passing it
    explicitly only asserts consistency.
    """

    f: np.ndarray
    F: float | None = None

    def __post_init__(self) -> None:
        f = np.array(self.f, dtype=float)
        if f.ndim != 1 or f.size < 1:
            raise ValueError("factor series must be a nonempty 1-d array")
        if not np.all(np.isfinite(f)):
            raise ValueError("factor series must be finite")
        f.setflags(write=False)
        realized = compute_F(f)
        if self.F is not None and float(self.F) != realized:
            raise ValueError("stored F must equal the mean square of f")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "F", realized)

    @property
    def n_periods(self) -> int:
        return self.f.size


@dataclass(frozen=True)
class EnsembleMoments:
    """Scalar averages of one (v, b) ensemble at factor strength F.

    ``source`` keeps the realized arrays when the moments came from a concrete
    ensemble; the free-energy diagnostics need them for the nonlinear averages.
    """

    inv_v: float
    inv_v2: float
    m1: float
    V1: float
    m2: float
    V2: float
    F: float
    m: float
    C: float
    source: AssetEnsemble | None = None

    def __post_init__(self) -> None:
        if not (self.inv_v > 0 and self.inv_v2 > 0):
            raise ValueError("<v^-1> and <v^-2> must be positive")
        if self.F < 0:
            raise ValueError("F must be nonnegative")
        slack = 1e-12
        if self.V1 < -slack or self.V2 < -slack:
            raise ValueError("tilted loading variances must be nonnegative")
        if self.m * self.m1 < -slack:
            raise ValueError("m and m1 must share a sign")
        if self.C < -slack:
            raise ValueError("C must be nonnegative")


def compute_F(f: np.ndarray) -> float:
    """Mean square of a factor series; order-independent, degree-2 homogeneous."""
    arr = np.asarray(f, dtype=float)
    if arr.size == 0:
        raise ValueError("factor series must be nonempty")
    return float(np.mean(np.square(arr)))


def sample_ensemble(
    v_spec: DistributionSpec,
    b_spec: DistributionSpec,
    N: int,
    seed: int,
) -> AssetEnsemble:
    """Draw N assets: residual variances from ``v_spec``, loadings from ``b_spec``.

    Deterministic given (specs, N, seed); the two draws use independent
    streams.  Assets carry no time index, so serial families are rejected.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    v_spec.require_positive_support("residual variance spec")
    for role, spec in (("v_spec", v_spec), ("b_spec", b_spec)):
        if spec.family == "ar1_gaussian":
            raise SpecError(f"{role}: serial families are only valid for the factor series")
    v = v_spec.sample(stream(seed, "assets", "v"), N)
    b = b_spec.sample(stream(seed, "assets", "b"), N)
    return AssetEnsemble(v=v, b=b)


def sample_factors(f_spec: DistributionSpec, p: int, seed: int) -> FactorSeries:
    """Draw a length-p factor series with analytic mean zero.

    ar1 series start from the stationary law to avoid burn-in bias in F.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    f_spec.require_zero_mean("factor series spec")
    f = f_spec.sample_series(stream(seed, "factors"), p)
    return FactorSeries(f=f)


def compute_moments(ensemble: AssetEnsemble, F: float) -> EnsembleMoments:
    """Empirical ensemble averages feeding every closed form."""
    if F < 0:
        raise ValueError("F must be nonnegative")
    v = ensemble.v
    b = ensemble.b
    u1 = 1.0 / v
    u2 = u1 * u1
    inv_v = float(np.mean(u1))
    inv_v2 = float(np.mean(u2))
    m1 = float(np.mean(u1 * b)) / inv_v
    V1 = float(np.mean(u1 * (b - m1) ** 2)) / inv_v
    m2 = float(np.mean(u2 * b)) / inv_v2
    V2 = float(np.mean(u2 * (b - m2) ** 2)) / inv_v2
    m = m1 / (1.0 + F * V1 * inv_v)
    C = F**2 * m**2 * V2 * inv_v2 + (inv_v2 / inv_v**2) * (1.0 + F * m * (m1 - m2) * inv_v) ** 2
    return EnsembleMoments(
        inv_v=inv_v, inv_v2=inv_v2, m1=m1, V1=V1, m2=m2, V2=V2, F=float(F), m=m, C=C,
        source=ensemble,
    )


def analytic_moments(
    v_spec: DistributionSpec,
    b_spec: DistributionSpec,
    F: float,
) -> EnsembleMoments:
    """Family-level moments for independently drawn v and b.

    Independence collapses the tilted statistics: m1 = m2 = E[b] and
    V1 = V2 = Var(b).  No realized arrays are attached, so the result feeds
    the closed forms but not the free-energy diagnostics.
    """
    if F < 0:
        raise ValueError("F must be nonnegative")
    if b_spec.family == "ar1_gaussian":
        raise SpecError("b_spec: serial families are only valid for the factor series")
    inv_v = v_spec.inv_mean()
    inv_v2 = v_spec.inv_sq_mean()
    mb = b_spec.mean()
    vb = b_spec.variance()
    m = mb / (1.0 + F * vb * inv_v)
    C = F**2 * m**2 * vb * inv_v2 + inv_v2 / inv_v**2
    return EnsembleMoments(
        inv_v=inv_v, inv_v2=inv_v2, m1=mb, V1=vb, m2=mb, V2=vb, F=float(F), m=m, C=C,
        source=None,
    )
