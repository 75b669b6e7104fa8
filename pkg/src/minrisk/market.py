"""Synthetic return matrices under the single-factor decomposition.

Scaling convention, applied exactly once each: the raw return of asset i in
period mu is b_i f_mu / sqrt(N) + y_imu with noise y of mean 0 and variance
v_i; the stored matrix divides raw returns by a further sqrt(N), so the risk
matrix J = X X^T carries entries (1/N) sum_mu x_imu x_jmu.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .ensemble import AssetEnsemble, FactorSeries
from .rng import stream

__all__ = [
    "ReturnMatrix",
    "RiskMatrix",
    "NOISE_FAMILIES",
    "generate_returns",
    "wishart",
    "expected_wishart",
    "write_return_matrix",
    "read_return_matrix",
    "write_risk_matrix",
    "read_risk_matrix",
]

# 'zero' suppresses the noise term entirely; diagnostic use only.
NOISE_FAMILIES = ("gaussian", "uniform", "two_point", "zero")


@dataclass(frozen=True)
class ReturnMatrix:
    """N x p matrix of scaled modified return rates."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("return matrix must be 2-d and nonempty")
        if not np.all(np.isfinite(a)):
            raise ValueError("return matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n_assets(self) -> int:
        return self.entries.shape[0]

    @property
    def n_periods(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class RiskMatrix:
    """Symmetric N x N variance-covariance matrix of scaled returns."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("risk matrix must be square")
        if not np.all(np.isfinite(a)):
            raise ValueError("risk matrix entries must be finite")
        scale = max(1.0, float(np.abs(a).max()))
        if float(np.abs(a - a.T).max()) > 1e-12 * scale:
            raise ValueError("risk matrix must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n_assets(self) -> int:
        return self.entries.shape[0]


def _noise(
    rng: np.random.Generator, v: np.ndarray, p: int, family: str
) -> np.ndarray:
    """Noise block with independent entries, mean 0, per-asset variance v_i."""
    n = v.size
    sd = np.sqrt(v)[:, None]
    if family == "gaussian":
        return rng.standard_normal((n, p)) * sd
    if family == "uniform":
        return rng.uniform(-1.0, 1.0, (n, p)) * (np.sqrt(3.0) * sd)
    if family == "two_point":
        return np.where(rng.random((n, p)) < 0.5, sd, -sd)
    if family == "zero":
        return np.zeros((n, p))
    raise ValueError(f"unknown noise family '{family}'; expected one of {NOISE_FAMILIES}")


def generate_returns(
    ensemble: AssetEnsemble,
    factors: FactorSeries,
    noise_seed: int,
    noise_family: str = "gaussian",
) -> ReturnMatrix:
    """Scaled return matrix for one realization of the noise.

    Deterministic given (ensemble, factors, noise_seed, noise_family).
    """
    n = ensemble.n_assets
    y = _noise(stream(noise_seed, "noise"), ensemble.v, factors.n_periods, noise_family)
    raw = np.outer(ensemble.b, factors.f) / np.sqrt(n) + y
    return ReturnMatrix(entries=raw / np.sqrt(n))


def wishart(X: ReturnMatrix) -> RiskMatrix:
    """Risk matrix J = X X^T of the stored scaled entries."""
    m = X.entries @ X.entries.T
    return RiskMatrix(entries=(m + m.T) / 2.0)


def expected_wishart(ensemble: AssetEnsemble, F: float, alpha: float) -> RiskMatrix:
    """Expectation of the risk matrix over the noise, at period ratio alpha.

    E[J] = alpha * diag(v) + (alpha * F / N) * b b^T, from the return
    decomposition with independent zero-mean noise and the factor series
    held fixed at mean square F.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if F < 0:
        raise ValueError("F must be nonnegative")
    n = ensemble.n_assets
    ej = alpha * np.diag(ensemble.v) + (alpha * F / n) * np.outer(ensemble.b, ensemble.b)
    return RiskMatrix(entries=ej)


# ----- binary interchange format ---------------------------------------------
# 16-byte header: 8-byte magic, uint32 N, uint32 p (little-endian), then the
# row-major float64 payload (N*p entries for returns, N*N for risk matrices).

_RETURNS_MAGIC = b"MRSKRET1"
_RISK_MAGIC = b"MRSKCOV1"


def _write(path, magic: bytes, n: int, p: int, payload: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<II", n, p))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def _read(path, magic: bytes, shape_of) -> tuple[np.ndarray, int, int]:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != magic:
            raise ValueError(f"{path}: bad or foreign header")
        n, p = struct.unpack("<II", head[8:])
        rows, cols = shape_of(n, p)
        payload = fh.read()
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: payload size {data.size} != {rows}x{cols}")
    return data.reshape(rows, cols).astype(float), n, p


def write_return_matrix(path, X: ReturnMatrix) -> None:
    _write(path, _RETURNS_MAGIC, X.n_assets, X.n_periods, X.entries)


def read_return_matrix(path) -> ReturnMatrix:
    data, _, _ = _read(path, _RETURNS_MAGIC, lambda n, p: (n, p))
    return ReturnMatrix(entries=data)


def write_risk_matrix(path, J: RiskMatrix, n_periods: int) -> None:
    _write(path, _RISK_MAGIC, J.n_assets, n_periods, J.entries)


def read_risk_matrix(path) -> tuple[RiskMatrix, int]:
    data, _, p = _read(path, _RISK_MAGIC, lambda n, _p: (n, n))
    return RiskMatrix(entries=data), p
