import numpy as np
import pytest
from scipy import stats

from maxcon.core import PATTERNS, ContrastMatrix, default_pg_contrasts
from maxcon.mvdist import QmcConfig, mvt_cdf, sample_statistics
from maxcon.power import (
    POWER_QMC,
    critical_u,
    critical_values,
    noncentrality,
    power_S,
    power_T,
    priority_index,
    r_tp,
    r_tp_qmc,
    rejection_grid,
)
from maxcon.simulate import ScenarioConfig, run_scenario
from maxcon.stattests import sigma_T

C = default_pg_contrasts()
D100 = 1.0 / np.array([56, 37, 7])
G100 = 97


@pytest.fixture(scope="module")
def crit100():
    return critical_values(0.05, C, D100, G100)


def test_single_contrast_reduces_to_t_quantile():
    c1 = ContrastMatrix([[-0.5, 0.0, 0.5]])
    u = critical_u(0.05, sigma_T(c1, D100), G100)
    assert u == pytest.approx(stats.t.ppf(0.95, G100), abs=2e-3)


def test_defect_at_critical_values(crit100):
    sig = sigma_T(C, D100)
    cfg = QmcConfig(abs_error_tol=1e-4)
    pu = 1 - mvt_cdf(crit100.thresholds_T, sig, G100, cfg=cfg).value
    pv = 1 - mvt_cdf(crit100.thresholds_S, sig, G100, cfg=cfg).value
    assert abs(pu - 0.05) < 2 * 3e-4
    assert abs(pv - 0.05) < 2 * 3e-4


def test_critical_values_by_sampling(crit100):
    x = sample_statistics("T", sigma_T(C, D100), G100, count=1_000_000, seed=2)
    se = np.sqrt(0.05 * 0.95 / 1e6)
    assert abs(np.mean(x.max(axis=1) >= crit100.u_alpha) - 0.05) < 3.5 * se + 3e-4
    assert abs(np.mean(np.any(x >= crit100.thresholds_S, axis=1)) - 0.05) < 3.5 * se + 3e-4


def test_s_thresholds_proportional_to_k_inv(crit100):
    np.testing.assert_allclose(crit100.thresholds_S / crit100.k_inv, crit100.v_alpha, rtol=1e-12)


def test_two_sided_critical_value_larger():
    one = critical_values(0.05, C, D100, G100)
    two = critical_values(0.05, C, D100, G100, tail="two")
    assert two.u_alpha > one.u_alpha and two.v_alpha > one.v_alpha
    sig = sigma_T(C, D100)
    u = two.u_alpha
    p = 1 - mvt_cdf(np.full(3, u), sig, G100, lower=np.full(3, -u), cfg=POWER_QMC).value
    assert abs(p - 0.05) < 1e-3


def test_noncentrality_examples():
    mu = 0.5 * np.array(PATTERNS["additive"])
    np.testing.assert_allclose(noncentrality("T", mu, 1.0, C, D100), [1.25, 0.96, 1.53], atol=0.005)
    mu = 0.5 * np.array(PATTERNS["recessive"])
    np.testing.assert_allclose(noncentrality("T", mu, 1.0, C, 1 / np.array([25, 50, 25])),
                               [1.77, 1.07, 2.13], atol=0.005)
    assert np.all(noncentrality("S", np.zeros(3), 2.0, C, D100) == 0)
    np.testing.assert_allclose(noncentrality("M", mu, 1.0, C, D100),
                               noncentrality("S", mu, 1.0, C, D100), rtol=1e-12)
    with pytest.raises(ValueError):
        noncentrality("Q", mu, 1.0, C, D100)


def test_zero_mean_power_is_alpha(crit100):
    for fn in (power_T, power_S):
        res = fn(np.zeros(3), 1.0, C, D100, G100, crit=crit100)
        assert abs(res.beta - 0.05) < 1e-3


def test_power_monotone_in_delta(crit100):
    for pattern in ("additive", "dominant", "recessive"):
        prev = None
        for delta in (0.0, 0.25, 0.5, 1.0):
            mu = delta * np.array(PATTERNS[pattern])
            res = power_T(mu, 1.0, C, D100, G100, crit=crit100)
            if prev is not None:
                assert res.beta >= prev.beta - 2 * (res.est_error + prev.est_error)
            prev = res


def test_power_s_parametrizations_agree(crit100):
    for pattern in ("additive", "dominant", "valley"):
        mu = 0.5 * np.array(PATTERNS[pattern])
        a = power_S(mu, 1.0, C, D100, G100, crit=crit100, parametrization="T")
        b = power_S(mu, 1.0, C, D100, G100, crit=crit100, parametrization="S")
        assert abs(a.beta - b.beta) <= 2 * (a.est_error + b.est_error) + 1e-9


def test_power_by_sampling(crit100):
    mu = 0.5 * np.array(PATTERNS["dominant"])
    lam = noncentrality("T", mu, 1.0, C, D100)
    x = sample_statistics("T", sigma_T(C, D100), G100, lam, count=400_000, seed=7)
    res = power_T(mu, 1.0, C, D100, G100, crit=crit100)
    emp = np.mean(x.max(axis=1) >= crit100.u_alpha)
    assert abs(emp - res.beta) < 3 * np.sqrt(emp * (1 - emp) / 4e5) + res.est_error


def test_priority_index():
    assert priority_index(C, np.full(3, 0.05)) == 0
    assert priority_index(C, D100) == 1
    assert priority_index(C, 1 / np.array([78, 20, 2])) == 1


def test_r_tp_single_contrast_equals_power():
    c1 = ContrastMatrix([[-1 / 3, -1 / 3, 2 / 3]])
    res = r_tp("T", 0, 0.5, 1.0, c1, D100, G100, mc_count=100_000, seed=1)
    assert res.estimate == res.power
    beta = power_T(0.5 * c1.coef[0], 1.0, c1, D100, G100).beta
    assert abs(res.power - beta) < 3.5 * res.power_se + 1e-3


def test_r_tp_bounded_by_power(crit100):
    for method in ("T", "S"):
        for k in range(3):
            res = r_tp(method, k, 0.5, 1.0, C, D100, G100, mc_count=50_000, seed=k, crit=crit100)
            assert res.estimate <= res.power


def test_r_tp_monte_carlo_matches_qmc(crit100):
    for method in ("T", "S"):
        mc = r_tp(method, 1, 0.5, 1.0, C, D100, G100, mc_count=400_000, seed=3, crit=crit100)
        q = r_tp_qmc(method, 1, 0.5, 1.0, C, D100, G100, crit=crit100)
        assert abs(mc.estimate - q.value) < 3 * np.hypot(mc.se, q.est_error / 3.5)


def test_r_tp_competitor_subset_is_larger(crit100):
    full = r_tp("T", 1, 0.5, 1.0, C, D100, G100, mc_count=100_000, seed=5, crit=crit100)
    sub = r_tp("T", 1, 0.5, 1.0, C, D100, G100, mc_count=100_000, seed=5, crit=crit100,
               competitors=[2])
    assert sub.estimate >= full.estimate


def test_power_matches_simulated_rejection_rate():
    cfg = ScenarioConfig(maf=0.25, n_total=100, pattern="dominant", delta=0.5, methods=("MCM", "MMCM"),
                         reps=6000, tail="one", seed=11)
    sim = run_scenario(cfg)
    crit = critical_values(0.05, C, D100, G100)
    mu = 0.5 * np.array(PATTERNS["dominant"])
    for name, fn in (("MCM", power_T), ("MMCM", power_S)):
        beta = fn(mu, 1.0, C, D100, G100, crit=crit)
        emp = sim[name].r_p
        se = np.sqrt(beta.beta * (1 - beta.beta) / cfg.reps)
        assert abs(emp - beta.beta) < 3 * np.hypot(se, beta.est_error / 3.5)


def test_two_sided_power_matches_simulation():
    cfg = ScenarioConfig(maf=0.12, n_total=300, pattern="recessive", delta=0.25, methods=("MCM",),
                         reps=6000, tail="two", seed=12)
    sim = run_scenario(cfg)
    D = 1 / np.array([234, 61, 5])
    beta = power_T(0.25 * np.array(PATTERNS["recessive"]), 1.0, C, D, 297, tail="two")
    se = np.sqrt(beta.beta * (1 - beta.beta) / cfg.reps)
    assert abs(sim["MCM"].r_p - beta.beta) < 3 * np.hypot(se, beta.est_error / 3.5)


def test_rejection_grid(crit100):
    mu = np.array([-1 / 6, -1 / 6, 2 / 6])
    x, y, dens, reject, selects = rejection_grid("T", mu, 1.0, C, D100, lim=(-4, 7), num=61,
                                                 crit=crit100)
    assert dens.shape == reject.shape == selects.shape == (61, 61)
    h = x[1] - x[0]
    assert abs(dens.sum() * h * h - 1.0) < 0.02
    # the dominant component is on the x axis: large x values reject
    assert reject[30, -1] and not reject[np.argmin(abs(y)), np.argmin(abs(x))]
