import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minrisk.distributions import DistributionSpec, SpecError
from minrisk.ensemble import (
    AssetEnsemble,
    FactorSeries,
    analytic_moments,
    compute_F,
    compute_moments,
    sample_ensemble,
    sample_factors,
)


@st.composite
def ensembles(draw):
    n = draw(st.integers(2, 12))
    v = draw(st.lists(st.floats(0.1, 10.0), min_size=n, max_size=n))
    b = draw(st.lists(st.floats(-3.0, 3.0), min_size=n, max_size=n))
    return AssetEnsemble(v=np.array(v), b=np.array(b))


# ----- types ------------------------------------------------------------------


def test_ensemble_validation():
    with pytest.raises(ValueError, match="two assets"):
        AssetEnsemble(v=np.array([1.0]), b=np.array([0.0]))
    with pytest.raises(ValueError, match="positive"):
        AssetEnsemble(v=np.array([1.0, -1.0]), b=np.array([0.0, 0.0]))
    with pytest.raises(ValueError, match="equal length"):
        AssetEnsemble(v=np.array([1.0, 1.0]), b=np.array([0.0]))


def test_factor_series_recomputes_F():
    fs = FactorSeries(f=np.array([1.0, -1.0, 1.0, -1.0]))
    assert fs.F == 1.0
    with pytest.raises(ValueError, match="mean square"):
        FactorSeries(f=np.array([1.0, 2.0]), F=99.0)


# ----- compute_F --------------------------------------------------------------


def test_compute_F_forced_arithmetic():
    assert compute_F([1.0, -1.0, 1.0, -1.0]) == 1.0
    assert compute_F([0.0, 0.0]) == 0.0
    assert compute_F([3.0, 4.0]) == 12.5
    with pytest.raises(ValueError, match="nonempty"):
        compute_F([])


@given(st.lists(st.floats(-100.0, 100.0), min_size=1, max_size=32), st.floats(0.0, 50.0))
def test_compute_F_is_degree_two_homogeneous(values, c):
    f = np.array(values)
    assert compute_F(c * f) == pytest.approx(c * c * compute_F(f), rel=1e-9, abs=1e-9)


# ----- sampling ---------------------------------------------------------------


def test_sample_ensemble_constant_families():
    ens = sample_ensemble(DistributionSpec.constant(1.0), DistributionSpec.constant(0.0), 3, 0)
    assert np.array_equal(ens.v, [1.0, 1.0, 1.0])
    assert np.array_equal(ens.b, [0.0, 0.0, 0.0])


def test_sample_ensemble_is_deterministic():
    spec_v = DistributionSpec.two_point(1.0, 2.0, 0.5)
    spec_b = DistributionSpec.gaussian(0.0, 1.0)
    a = sample_ensemble(spec_v, spec_b, 100, 7)
    b = sample_ensemble(spec_v, spec_b, 100, 7)
    assert np.array_equal(a.v, b.v) and np.array_equal(a.b, b.b)


def test_sample_ensemble_law_of_large_numbers():
    # two_point {1,2} at 1/2 has mean 1.5, sd 0.5
    ens = sample_ensemble(
        DistributionSpec.two_point(1.0, 2.0, 0.5), DistributionSpec.constant(1.0), 10_000, 7
    )
    assert abs(ens.v.mean() - 1.5) < 3 * 0.5 / math.sqrt(10_000)


def test_sample_ensemble_rejects_bad_roles():
    with pytest.raises(SpecError, match="support"):
        sample_ensemble(DistributionSpec.gaussian(0.0, 1.0), DistributionSpec.constant(0.0), 10, 0)
    with pytest.raises(SpecError, match="serial"):
        sample_ensemble(
            DistributionSpec.constant(1.0), DistributionSpec.ar1_gaussian(1.0, 0.5), 10, 0
        )
    with pytest.raises(ValueError, match="at least 2"):
        sample_ensemble(DistributionSpec.constant(1.0), DistributionSpec.constant(0.0), 1, 0)


def test_sample_factors_zero_and_gaussian():
    fs = sample_factors(DistributionSpec.constant(0.0), 5, 0)
    assert np.array_equal(fs.f, np.zeros(5)) and fs.F == 0.0
    # mean square of p standard normals concentrates like sqrt(2/p)
    fs = sample_factors(DistributionSpec.gaussian(0.0, 1.0), 100_000, 3)
    assert abs(fs.F - 1.0) < 3 * math.sqrt(2.0 / 100_000)


def test_sample_factors_rejects_nonzero_mean():
    with pytest.raises(SpecError, match="mean"):
        sample_factors(DistributionSpec.gaussian(1.0, 1.0), 10, 0)


def test_ar1_factors_match_stationary_mean_square():
    rho, sd, p = 0.6, 0.8, 200_000
    fs = sample_factors(DistributionSpec.ar1_gaussian(sd, rho), p, 11)
    expected = sd * sd / (1 - rho * rho)
    # squared-series autocorrelation rho^2 inflates the effective error
    se = math.sqrt(2.0 / p) * expected * math.sqrt((1 + rho * rho) / (1 - rho * rho))
    assert abs(fs.F - expected) < 4 * se


# ----- moments ----------------------------------------------------------------


def test_moments_zero_loadings():
    ens = AssetEnsemble(v=np.array([1.0, 2.0, 4.0]), b=np.zeros(3))
    mom = compute_moments(ens, 3.0)
    assert mom.m1 == 0 and mom.m2 == 0 and mom.V1 == 0 and mom.V2 == 0 and mom.m == 0
    assert mom.C == pytest.approx(mom.inv_v2 / mom.inv_v**2, rel=1e-14)


def test_moments_uniform_ensemble():
    ens = AssetEnsemble(v=np.ones(4), b=np.ones(4))
    mom = compute_moments(ens, 1.0)
    assert mom.inv_v == 1.0
    assert mom.m1 == 1.0
    assert mom.V1 == 0.0
    assert mom.m == 1.0
    assert mom.C == 1.0


def test_moments_hand_case():
    ens = AssetEnsemble(v=np.array([1.0, 2.0]), b=np.array([1.0, 2.0]))
    mom = compute_moments(ens, 1.0)
    assert mom.inv_v == pytest.approx(0.75, rel=1e-14)
    assert mom.inv_v2 == pytest.approx(0.625, rel=1e-14)
    assert mom.m1 == pytest.approx(4.0 / 3.0, rel=1e-14)
    assert mom.V1 == pytest.approx(2.0 / 9.0, rel=1e-13)
    assert mom.m2 == pytest.approx(1.2, rel=1e-14)
    assert mom.V2 == pytest.approx(0.16, rel=1e-13)
    assert mom.m == pytest.approx(8.0 / 7.0, rel=1e-13)
    assert mom.C == pytest.approx(74.0 / 49.0, rel=1e-13)


@given(ensembles(), st.floats(0.0, 10.0))
@settings(max_examples=80)
def test_moment_invariants(ens, F):
    mom = compute_moments(ens, F)
    assert mom.V1 >= 0 and mom.V2 >= 0
    assert mom.m * mom.m1 >= -1e-12
    assert mom.C >= 0


@given(ensembles(), st.floats(0.0, 10.0), st.randoms(use_true_random=False))
@settings(max_examples=60)
def test_moments_permutation_invariant(ens, F, pyrandom):
    order = list(range(ens.n_assets))
    pyrandom.shuffle(order)
    shuffled = AssetEnsemble(v=ens.v[order], b=ens.b[order])
    a = compute_moments(ens, F)
    b = compute_moments(shuffled, F)
    for name in ("inv_v", "inv_v2", "m1", "V1", "m2", "V2", "m", "C"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-10, abs=1e-12)


def test_analytic_moments_match_large_sample():
    v_spec = DistributionSpec.two_point(1.0, 2.0, 0.5)
    b_spec = DistributionSpec.gaussian(0.5, 1.0)
    ens = sample_ensemble(v_spec, b_spec, 200_000, 99)
    emp = compute_moments(ens, 2.0)
    ana = analytic_moments(v_spec, b_spec, 2.0)
    assert emp.inv_v == pytest.approx(ana.inv_v, rel=0.005)
    assert emp.inv_v2 == pytest.approx(ana.inv_v2, rel=0.005)
    assert emp.m1 == pytest.approx(ana.m1, rel=0.02)
    assert emp.V1 == pytest.approx(ana.V1, rel=0.02)
    assert emp.m == pytest.approx(ana.m, rel=0.02)
    assert emp.C == pytest.approx(ana.C, rel=0.03)


def test_analytic_moments_have_no_arrays():
    ana = analytic_moments(DistributionSpec.constant(1.0), DistributionSpec.constant(0.0), 0.0)
    assert ana.source is None
