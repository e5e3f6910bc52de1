from math import lgamma

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from maxcon.errors import IndefiniteMatrix, NotSymmetric, SingularSigma
from maxcon.mvdist import QmcConfig, factorize, mvn_cdf, mvt_cdf, mvt_null_density, sample_statistics
from maxcon.stattests import sigma_T

from oracles import mc_rectangle, random_correlation

CFG = QmcConfig(abs_error_tol=2e-4)


def close(est, exact, floor=2e-4):
    assert abs(est.value - exact) <= max(est.est_error, floor) + 1e-12, (est, exact)


# --------------------------------------------------------------------------- factorization


def test_factor_reproduces_matrix():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4))
    s = a @ a.T
    model = factorize(s)
    assert model.rank == 4
    np.testing.assert_allclose(model.factor @ model.factor.T, s, atol=1e-10)


def test_singular_rank_detected():
    sig = sigma_T(np.array([[-.5, 0, .5], [-1 / 3, -1 / 3, 2 / 3], [-2 / 3, 1 / 3, 1 / 3]]),
                  np.array([1 / 56, 1 / 37, 1 / 7]))
    assert sig.rank == 2
    assert sig.is_singular
    np.testing.assert_allclose(sig.factor @ sig.factor.T, sig.matrix, atol=1e-10)


def test_factorize_errors():
    with pytest.raises(NotSymmetric):
        factorize([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(IndefiniteMatrix):
        factorize([[1.0, 2.0], [2.0, 1.0]])


# --------------------------------------------------------------------------- closed forms


def test_univariate_normal_and_t():
    close(mvn_cdf([1.3], [[1.0]], cfg=CFG), stats.norm.cdf(1.3))
    close(mvt_cdf([1.3], [[1.0]], 5, cfg=CFG), stats.t.cdf(1.3, 5))
    close(mvt_cdf([0.7], [[4.0]], 9, lower=[-2.0], cfg=CFG),
          stats.t.cdf(0.35, 9) - stats.t.cdf(-1.0, 9))


@pytest.mark.parametrize("nu,delta,u", [(5, 1.0, 1.5), (20, -0.5, 0.2), (97, 2.0, 1.9)])
def test_univariate_noncentral_t(nu, delta, u):
    close(mvt_cdf([u], [[1.0]], nu, delta=[delta], cfg=CFG), stats.nct.cdf(u, nu, delta))


@pytest.mark.parametrize("rho", [-0.8, -0.3, 0.0, 0.5, 0.95])
def test_bivariate_orthant(rho):
    exact = 0.25 + np.arcsin(rho) / (2 * np.pi)
    sig = [[1.0, rho], [rho, 1.0]]
    close(mvn_cdf([0, 0], sig, cfg=CFG), exact)
    # orthant probabilities do not depend on the chi scale
    close(mvt_cdf([0, 0], sig, 4, cfg=CFG), exact)


def test_trivariate_orthant():
    r = random_correlation(3, np.random.default_rng(5))
    exact = 0.125 + (np.arcsin(r[0, 1]) + np.arcsin(r[0, 2]) + np.arcsin(r[1, 2])) / (4 * np.pi)
    close(mvt_cdf(np.zeros(3), r, 7, cfg=CFG), exact)


def test_identity_t_shares_denominator():
    # the components share one chi scale, so this is not the squared univariate cdf
    u, nu = 1.0, 5
    est = mvt_cdf([u, u], np.eye(2), nu, cfg=CFG)
    quad, _ = integrate.quad(
        lambda s: stats.norm.cdf(s * u) ** 2 * 2 * nu * s * stats.chi2.pdf(nu * s * s, nu), 0, np.inf)
    close(est, quad)
    assert abs(quad - stats.t.cdf(u, nu) ** 2) > 3e-3


def test_identity_normal_factorizes():
    close(mvn_cdf([0.3, -0.2, 1.1], np.eye(3), cfg=CFG),
          np.prod(stats.norm.cdf([0.3, -0.2, 1.1])))


def test_rank_one_reduces_to_univariate():
    v = np.array([1.0, -2.0, 0.5])
    sig = np.outer(v, v)
    upper = np.array([1.0, 3.0, 0.4])
    # X = v * T1: constraints v_k T1 <= u_k
    hi = min(upper[k] / v[k] for k in range(3) if v[k] > 0)
    lo = max(upper[k] / v[k] for k in range(3) if v[k] < 0)
    exact = max(stats.t.cdf(hi, 6) - stats.t.cdf(lo, 6), 0.0)
    close(mvt_cdf(upper, sig, 6, cfg=CFG), exact)


def test_against_scipy_nonsingular():
    rng = np.random.default_rng(11)
    for m in (2, 3):
        r = random_correlation(m, rng)
        b = rng.normal(0.5, 1.0, m)
        exact = stats.multivariate_normal(np.zeros(m), r).cdf(b)
        close(mvn_cdf(b, r, cfg=CFG), exact, floor=5e-4)
        ref = stats.multivariate_t(np.zeros(m), r, df=8).cdf(b, maxpts=2_000_000, random_state=1)
        close(mvt_cdf(b, r, 8, cfg=CFG), ref, floor=1e-3)


def test_large_nu_approaches_normal():
    r = random_correlation(3, np.random.default_rng(2))
    b = [0.5, 1.0, -0.2]
    n = mvn_cdf(b, r, cfg=CFG).value
    t = mvt_cdf(b, r, 1e6, cfg=CFG).value
    assert abs(n - t) < 5e-4


def test_infinite_limits():
    r = random_correlation(3, np.random.default_rng(3))
    assert mvt_cdf(np.full(3, np.inf), r, 5).value == pytest.approx(1.0, abs=1e-12)
    assert mvt_cdf([0.5, 0.5, 0.5], r, 5, lower=[0.5, 0, 0]).value == 0.0


# --------------------------------------------------------------------------- Monte-Carlo oracle


def test_mc_oracle_singular_contrast_law():
    D = np.array([1 / 56, 1 / 37, 1 / 7])
    C = np.array([[-.5, 0, .5], [-1 / 3, -1 / 3, 2 / 3], [-2 / 3, 1 / 3, 1 / 3]])
    sig = sigma_T(C, D)
    est = mvt_cdf(np.full(3, 1.89), sig, 97, cfg=CFG)
    mc, se = mc_rectangle(sig.matrix, 97, np.full(3, -np.inf), np.full(3, 1.89), 400_000, seed=4)
    assert abs(est.value - mc) <= 3 * np.hypot(est.est_error / 3.5, se)
    assert abs((1 - est.value) - 0.05) < 2e-3


# --------------------------------------------------------------------------- null density


def test_null_density_matches_scipy():
    r = random_correlation(2, np.random.default_rng(8))
    pts = np.array([[0.0, 0.0], [1.0, -0.5], [2.0, 2.5]])
    np.testing.assert_allclose(mvt_null_density(pts, r, 9),
                               stats.multivariate_t(np.zeros(2), r, df=9).pdf(pts), rtol=1e-10)


def test_null_density_singular_raises():
    with pytest.raises(SingularSigma):
        mvt_null_density([0.0, 0.0], np.ones((2, 2)), 5)


# --------------------------------------------------------------------------- sampler


def test_sampler_moments():
    r = random_correlation(3, np.random.default_rng(9))
    x = sample_statistics("T", r, 30, lam=[1.0, 0.0, -1.0], count=200_000, seed=1)
    # E[1 / sqrt(W / nu)] for W ~ chi2(nu)
    nu = 30
    k = np.sqrt(nu / 2) * np.exp(lgamma((nu - 1) / 2) - lgamma(nu / 2))
    np.testing.assert_allclose(x.mean(axis=0), k * np.array([1.0, 0.0, -1.0]), atol=0.01)
    m = sample_statistics("M", r, 30, count=200_000, seed=1)
    np.testing.assert_allclose(np.cov(m.T), r, atol=0.02)


def test_sampler_reproducible():
    r = np.eye(2)
    a = sample_statistics("S", r, 10, count=5, seed=3)
    b = sample_statistics("S", r, 10, count=5, seed=3)
    np.testing.assert_array_equal(a, b)


# --------------------------------------------------------------------------- determinism, budget


def test_same_seed_same_value():
    r = random_correlation(3, np.random.default_rng(12))
    a = mvt_cdf([1, 1, 1], r, 12, cfg=QmcConfig(seed=5))
    b = mvt_cdf([1, 1, 1], r, 12, cfg=QmcConfig(seed=5))
    assert a == b


def test_budget_flag():
    r = random_correlation(3, np.random.default_rng(13))
    est = mvt_cdf([0.5, 0.2, 0.9], r, 5, cfg=QmcConfig(abs_error_tol=1e-9, max_points=10_000))
    assert est.budget_exhausted and not est.converged
    assert 0.0 <= est.value <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        QmcConfig(abs_error_tol=0)
    with pytest.raises(ValueError):
        mvt_cdf([1.0], [[1.0]], 0.5)


# --------------------------------------------------------------------------- properties


@st.composite
def problems(draw):
    m = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2 ** 16))
    rng = np.random.default_rng(seed)
    r = random_correlation(m, rng)
    b = rng.normal(0.5, 1.0, m)
    nu = draw(st.sampled_from([3, 10, 50, np.inf]))
    return r, b, nu


@settings(max_examples=25, deadline=None)
@given(problems())
def test_probability_in_unit_interval_and_monotone(prob):
    r, b, nu = prob
    cfg = QmcConfig(abs_error_tol=1e-3)
    p1 = mvt_cdf(b, r, nu, cfg=cfg)
    p2 = mvt_cdf(b + 0.5, r, nu, cfg=cfg)
    assert 0.0 <= p1.value <= 1.0
    assert p2.value >= p1.value - p1.est_error - p2.est_error


@settings(max_examples=20, deadline=None)
@given(problems(), st.randoms(use_true_random=False))
def test_coordinate_permutation_invariance(prob, rnd):
    r, b, nu = prob
    perm = list(range(len(b)))
    rnd.shuffle(perm)
    cfg = QmcConfig(abs_error_tol=1e-3)
    p1 = mvt_cdf(b, r, nu, cfg=cfg)
    p2 = mvt_cdf(b[perm], r[np.ix_(perm, perm)], nu, cfg=cfg)
    assert abs(p1.value - p2.value) <= p1.est_error + p2.est_error + 1e-9


@settings(max_examples=20, deadline=None)
@given(problems(), st.floats(0.2, 5.0))
def test_scale_equivariance(prob, c):
    # P(X <= b | c^2 Sigma) = P(X <= b / c | Sigma)
    r, b, nu = prob
    cfg = QmcConfig(abs_error_tol=1e-3)
    p1 = mvt_cdf(b, c * c * r, nu, cfg=cfg)
    p2 = mvt_cdf(b / c, r, nu, cfg=cfg)
    assert abs(p1.value - p2.value) <= p1.est_error + p2.est_error + 1e-9
