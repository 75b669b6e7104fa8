import math

import numpy as np
import pytest

from minrisk.distributions import DistributionSpec
from minrisk.ensemble import AssetEnsemble, FactorSeries, sample_ensemble, sample_factors
from minrisk.market import (
    ReturnMatrix,
    RiskMatrix,
    expected_wishart,
    generate_returns,
    read_return_matrix,
    read_risk_matrix,
    wishart,
    write_return_matrix,
    write_risk_matrix,
)


def _flat_ensemble(v, b):
    return AssetEnsemble(v=np.array(v, dtype=float), b=np.array(b, dtype=float))


def test_risk_matrix_requires_symmetry():
    with pytest.raises(ValueError, match="symmetric"):
        RiskMatrix(entries=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_factorless_two_point_noise_has_fixed_magnitude():
    ens = _flat_ensemble([1.0, 4.0, 0.25], [0.0, 0.0, 0.0])
    fac = FactorSeries(f=np.linspace(-1, 1, 7))
    X = generate_returns(ens, fac, noise_seed=5, noise_family="two_point")
    expected = np.sqrt(ens.v / ens.n_assets)[:, None]
    assert np.allclose(np.abs(X.entries), expected, rtol=1e-12)


def test_zero_noise_gives_pure_factor_term():
    # raw entry b f / sqrt(N), stored entry b f / N
    ens = _flat_ensemble([1.0, 1.0], [2.0, 2.0])
    fac = FactorSeries(f=np.array([3.0]))
    X = generate_returns(ens, fac, noise_seed=0, noise_family="zero")
    assert np.allclose(X.entries, 3.0, rtol=1e-12)


def test_noise_variance_matches_residual_variance():
    ens = _flat_ensemble([0.5, 1.0, 2.0, 4.0], [1.0, -1.0, 2.0, 0.0])
    p = 100_000
    fac = sample_factors(DistributionSpec.gaussian(0.0, 1.0), p, 21)
    X = generate_returns(ens, fac, noise_seed=22, noise_family="gaussian")
    raw = X.entries * math.sqrt(ens.n_assets)
    resid = raw - np.outer(ens.b, fac.f) / math.sqrt(ens.n_assets)
    per_asset = np.mean(resid**2, axis=1)
    # variance of y^2 for gaussian noise is 2 v^2
    for i in range(ens.n_assets):
        se = math.sqrt(2.0 / p) * ens.v[i]
        assert abs(per_asset[i] - ens.v[i]) < 3 * se


def test_wishart_zero_and_rank_one():
    assert np.array_equal(wishart(ReturnMatrix(np.zeros((3, 2)))).entries, np.zeros((3, 3)))
    X = ReturnMatrix(np.array([[2.0], [3.0]]))
    J = wishart(X).entries
    assert np.allclose(J, [[4.0, 6.0], [6.0, 9.0]], rtol=1e-14)


def test_wishart_positive_definite_when_periods_exceed_assets():
    ens = sample_ensemble(
        DistributionSpec.two_point(1.0, 2.0, 0.5), DistributionSpec.gaussian(0.0, 1.0), 40, 3
    )
    fac = sample_factors(DistributionSpec.gaussian(0.0, 1.0), 80, 4)
    J = wishart(generate_returns(ens, fac, 5))
    assert np.linalg.eigvalsh(J.entries).min() > 0


def test_expected_wishart_closed_form():
    ens = _flat_ensemble([1.0, 1.0], [1.0, 1.0])
    EJ = expected_wishart(ens, F=1.0, alpha=2.0)
    assert np.allclose(EJ.entries, [[3.0, 1.0], [1.0, 3.0]], rtol=1e-14)
    # zero loadings leave only the diagonal part
    ens0 = _flat_ensemble([1.0, 2.0], [0.0, 0.0])
    assert np.allclose(expected_wishart(ens0, 5.0, 3.0).entries, np.diag([3.0, 6.0]), rtol=1e-14)


def test_expected_wishart_trace_identity():
    ens = _flat_ensemble([1.0, 2.0, 0.5], [1.0, -2.0, 0.25])
    alpha, F = 2.5, 1.7
    EJ = expected_wishart(ens, F, alpha)
    n = ens.n_assets
    expected = alpha * ens.v.mean() + alpha * F * np.mean(ens.b**2) / n
    assert np.trace(EJ.entries) / n == pytest.approx(expected, rel=1e-14)


def test_expected_wishart_loading_scale():
    ens = _flat_ensemble([1.0, 2.0, 0.5], [1.0, -2.0, 0.25])
    doubled = _flat_ensemble(ens.v, 2.0 * ens.b)
    alpha, F = 2.0, 1.3
    base = expected_wishart(ens, F, alpha).entries - alpha * np.diag(ens.v)
    big = expected_wishart(doubled, F, alpha).entries - alpha * np.diag(ens.v)
    assert np.allclose(big, 4.0 * base, rtol=1e-13)


def test_monte_carlo_mean_matches_expected_wishart():
    ens = _flat_ensemble([0.5, 1.0, 2.0], [1.0, -1.0, 0.5])
    fac = sample_factors(DistributionSpec.gaussian(0.0, 1.0), 6, 31)
    alpha = fac.n_periods / ens.n_assets
    trials = 10_000
    acc = np.zeros((3, 3))
    acc2 = np.zeros((3, 3))
    for t in range(trials):
        J = wishart(generate_returns(ens, fac, noise_seed=1000 + t)).entries
        acc += J
        acc2 += J * J
    mean = acc / trials
    se = np.sqrt(np.maximum(acc2 / trials - mean**2, 0) / trials)
    EJ = expected_wishart(ens, fac.F, alpha).entries
    assert np.all(np.abs(mean - EJ) <= 3 * se + 1e-12)


def test_binary_roundtrip(tmp_path):
    ens = sample_ensemble(
        DistributionSpec.constant(1.0), DistributionSpec.gaussian(0.0, 1.0), 6, 1
    )
    fac = sample_factors(DistributionSpec.gaussian(0.0, 1.0), 9, 2)
    X = generate_returns(ens, fac, 3)
    J = wishart(X)

    xpath = tmp_path / "returns.bin"
    write_return_matrix(xpath, X)
    assert xpath.stat().st_size == 16 + 8 * 6 * 9
    back = read_return_matrix(xpath)
    assert np.array_equal(back.entries, X.entries)

    jpath = tmp_path / "risk.bin"
    write_risk_matrix(jpath, J, fac.n_periods)
    jback, p = read_risk_matrix(jpath)
    assert p == 9
    assert np.array_equal(jback.entries, J.entries)

    with pytest.raises(ValueError, match="header"):
        read_risk_matrix(xpath)
