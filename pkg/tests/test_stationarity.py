import numpy as np
import pytest

from minrisk.distributions import DistributionSpec
from minrisk.ensemble import AssetEnsemble, analytic_moments, compute_moments, sample_ensemble, sample_factors
from minrisk.replica import (
    OrderParameterSet,
    StationarityError,
    beta_derivative,
    closed_form_order_parameters,
    free_energy,
    free_energy_gradient,
    predict,
    solve_stationary,
)

from oracles import numeric_gradient


def _iid_moments(n=50):
    return compute_moments(AssetEnsemble(v=np.ones(n), b=np.zeros(n)), 0.0)


def _factor_moments(n=200, seed=17):
    ens = sample_ensemble(
        DistributionSpec.two_point(1.0, 2.0, 0.5), DistributionSpec.gaussian(0.5, 1.0), n, seed
    )
    fac = sample_factors(DistributionSpec.gaussian(0.0, 1.0), 3 * n, seed)
    return compute_moments(ens, fac.F)


def _perturbed(theta: OrderParameterSet, rng: np.random.Generator, size: float) -> OrderParameterSet:
    x = theta.as_array()
    return OrderParameterSet.from_array(x * (1.0 + size * rng.uniform(-1, 1, x.size)))


# ----- gradient correctness ------------------------------------------------------


@pytest.mark.parametrize("beta", [1.0, 10.0])
@pytest.mark.parametrize("alpha", [1.5, 3.0])
def test_analytic_gradient_matches_finite_differences(alpha, beta):
    moments = _factor_moments()
    rng = np.random.default_rng(42)
    theta = _perturbed(closed_form_order_parameters(moments, alpha, beta), rng, 0.3)
    analytic = free_energy_gradient(theta, moments, alpha, beta)
    numeric = numeric_gradient(theta, moments, alpha, beta)
    scale = np.maximum(1.0, np.abs(analytic))
    assert np.abs(analytic - numeric).max() / scale.max() < 1e-5
    assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-5 * scale.max())


def test_free_energy_is_permutation_symmetric():
    moments = _factor_moments(n=30)
    ens = moments.source
    order = np.random.default_rng(0).permutation(ens.n_assets)
    shuffled = compute_moments(AssetEnsemble(v=ens.v[order], b=ens.b[order]), moments.F)
    alpha, beta = 2.5, 10.0
    theta = closed_form_order_parameters(moments, alpha, beta)
    a = free_energy(theta, moments, alpha, beta)
    b = free_energy(theta, shuffled, alpha, beta)
    assert a == pytest.approx(b, rel=1e-12)


def test_free_energy_domain_errors():
    moments = _iid_moments()
    theta = closed_form_order_parameters(moments, 2.0, 10.0)
    bad = OrderParameterSet.from_array(
        np.where(np.arange(11) == 9, -1.0, theta.as_array())  # chi_s_tilde < 0
    )
    with pytest.raises(ValueError, match="positive"):
        free_energy(bad, moments, 2.0, 10.0)


def test_free_energy_requires_realized_arrays():
    ana = analytic_moments(DistributionSpec.constant(1.0), DistributionSpec.constant(0.0), 0.0)
    with pytest.raises(ValueError, match="realized"):
        solve_stationary(ana, 2.0)


# ----- stationarity of the closed forms ------------------------------------------


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_closed_forms_zero_the_gradient(alpha):
    for moments in (_iid_moments(), _factor_moments()):
        theta = closed_form_order_parameters(moments, alpha, 1e3)
        g = free_energy_gradient(theta, moments, alpha, 1e3)
        assert np.abs(g).max() <= 1e-6


def test_solver_reproduces_closed_forms():
    moments = _factor_moments()
    alpha, beta = 3.0, 1e3
    theta = solve_stationary(moments, alpha, beta)
    closed = closed_form_order_parameters(moments, alpha, beta)
    assert np.allclose(theta.as_array(), closed.as_array(), rtol=1e-8, atol=1e-10)


def test_solver_recovers_from_perturbed_start():
    moments = _factor_moments()
    alpha, beta = 2.0, 1e3
    closed = closed_form_order_parameters(moments, alpha, beta)
    rng = np.random.default_rng(1)
    start = _perturbed(closed, rng, 0.05)
    theta = solve_stationary(moments, alpha, beta, init=start)
    g = free_energy_gradient(theta, moments, alpha, beta)
    assert np.abs(g).max() <= 1e-6
    assert theta.q_w == pytest.approx(closed.q_w, rel=1e-7)
    assert theta.m == pytest.approx(closed.m, rel=1e-7)


def test_direct_parameters_match_known_iid_limits():
    moments = _iid_moments()
    beta = 1e3
    theta = solve_stationary(moments, 2.0, beta)
    assert theta.q_w == pytest.approx(2.0, rel=0.01)
    assert theta.chi_w == pytest.approx(1.0 / (beta * 1.0), rel=0.01)
    doubled = solve_stationary(moments, 2.0, 2 * beta)
    assert doubled.chi_w / theta.chi_w == pytest.approx(0.5, rel=0.02)


def test_nonconvergence_raises_with_residuals():
    moments = _factor_moments()
    far = OrderParameterSet(
        k=1.0, m=5.0, h=3.0, chi_w=7.0, q_w=40.0, chi_w_tilde=90.0, q_w_tilde=80.0,
        chi_s=6.0, q_s=50.0, chi_s_tilde=2.0, q_s_tilde=70.0,
    )
    with pytest.raises(StationarityError) as err:
        solve_stationary(moments, 2.0, 1e3, init=far, maxfev=12)
    assert err.value.residuals.shape == (11,)


# ----- beta limit ----------------------------------------------------------------


def test_beta_derivative_recovers_epsilon_iid():
    moments = _iid_moments()
    pred = predict(moments, 2.0)
    value = beta_derivative(moments, 2.0, 1e3)
    assert abs(value - pred.epsilon) / pred.epsilon < 0.01


def test_beta_derivative_correction_scales_like_half_inverse_beta():
    moments = _factor_moments()
    alpha = 3.0
    eps = predict(moments, alpha).epsilon
    for beta in (2e2, 1e3):
        value = beta_derivative(moments, alpha, beta)
        assert value - eps == pytest.approx(1.0 / (2.0 * beta), rel=0.02)


def test_beta_derivative_far_from_limit_misses_epsilon():
    moments = _iid_moments()
    pred = predict(moments, 2.0)
    value = beta_derivative(moments, 2.0, 1e-3)
    assert abs(value - pred.epsilon) / pred.epsilon > 0.01
