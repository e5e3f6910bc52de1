"""Critical values, power functions, priority diagnostics and true-pattern rates.

Everything here is parametrized by the population means ``mu``, the error
variance ``sigma2``, the contrast matrix ``C`` and ``D = diag(1/n_i)``.  The
significance level is one-sided by default (``P(max >= threshold) = alpha``);
``tail="two"`` switches to the two-directional max over ``[C; -C]``.

Both powers integrate the T vector law: the S thresholds are mapped into the T
scale by ``K_S^{-1}``, since ``S_k <= v`` iff ``T_k <= sqrt(c'c / c'Dc) v``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mvdist
from .core import ContrastMatrix
from .errors import BudgetExhausted, MaxconError
from .mvdist import CovarianceModel, QmcConfig
from .stattests import TAILS, _coef, contrast_products, k_inverse, sigma_S, sigma_T

#: Tighter default than the tests use: thresholds need ~3 correct decimals.
POWER_QMC = QmcConfig(abs_error_tol=1e-4)


@dataclass(frozen=True)
class CriticalValues:
    u_alpha: float
    v_alpha: float
    k_inv: np.ndarray

    @property
    def thresholds_T(self) -> np.ndarray:
        return np.full(self.k_inv.size, self.u_alpha)

    @property
    def thresholds_S(self) -> np.ndarray:
        """``K_S^{-1} v_alpha``: the S critical value expressed on the T scale."""
        return self.k_inv * self.v_alpha


@dataclass(frozen=True)
class PowerResult:
    beta: float
    est_error: float
    method: str


@dataclass(frozen=True)
class RtpResult:
    """Monte-Carlo estimate of the true-pattern detection rate (and of the power)."""

    estimate: float
    se: float
    power: float
    power_se: float
    count: int
    method: str


def noncentrality(kind: str, mu, sigma2: float, C, D) -> np.ndarray:
    """Noncentrality (mean) vector of the T, S or M statistics.

    ``T``: ``c'mu / sqrt(sigma2 c'Dc)``; ``S``: ``c'mu / sqrt(sigma2 c'c)``;
    ``M``: ``c'mu / sqrt(c'c)``.
    """
    if not sigma2 > 0:
        raise MaxconError("sigma2 must be > 0")
    c = _coef(C)
    mu = np.asarray(mu, dtype=float)
    cdc, cc = contrast_products(c, D)
    num = c @ mu
    kind = kind.upper()
    if kind == "T":
        return num / np.sqrt(sigma2 * np.diag(cdc))
    if kind == "S":
        return num / np.sqrt(sigma2 * cc)
    if kind == "M":
        return num / np.sqrt(cc)
    raise ValueError(f"kind must be T, S or M, got {kind!r}")


def _tail_prob(weights, sigma, gamma, cfg, tail, delta=None, scale=1.0):
    """``P(max statistic >= scale * weights)``, one- or two-directional."""
    upper = scale * weights
    lower = -upper if tail == "two" else None
    est = mvdist.mvt_cdf(upper, sigma, gamma, delta=delta, cfg=cfg, lower=lower)
    return 1.0 - est.value, est


def _solve_scale(weights, sigma, gamma, alpha, cfg, tail, hi=10.0):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if tail not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}")
    hi = hi / float(np.min(weights))
    lo = 0.0
    width_tol = 1e-4 / float(np.max(weights))
    est = None
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        p, est = _tail_prob(weights, sigma, gamma, cfg, tail, scale=mid)
        if abs(p - alpha) < 0.1 * est.est_error:
            break
        if p > alpha:
            lo = mid
        else:
            hi = mid
    else:
        mid = 0.5 * (lo + hi)
        p, est = _tail_prob(weights, sigma, gamma, cfg, tail, scale=mid)
    if est.budget_exhausted:
        raise BudgetExhausted(f"integrator error {est.est_error:.2g} above tolerance at the critical value")
    return mid


def critical_u(alpha: float, sigma_t, gamma, cfg: QmcConfig | None = None, tail: str = "one") -> float:
    """Common threshold ``u`` with ``P(max_k T_k >= u | H0) = alpha``."""
    sigma_t = sigma_t if isinstance(sigma_t, CovarianceModel) else mvdist.factorize(sigma_t)
    return _solve_scale(np.ones(sigma_t.m), sigma_t, gamma, alpha, cfg or POWER_QMC, tail)


def critical_v(alpha: float, C, D, gamma, cfg: QmcConfig | None = None, tail: str = "one"):
    """Threshold ``v`` of ``S_max`` and the ``K_S^{-1}`` diagonal.

    Solved on the T scale: ``P(T_k >= k_inv_k v for some k | H0) = alpha``.
    Returns ``(v, k_inv)``.
    """
    kinv = k_inverse(C, D)
    v = _solve_scale(kinv, sigma_T(C, D), gamma, alpha, cfg or POWER_QMC, tail)
    return v, kinv


def critical_values(alpha: float, C, D, gamma, cfg: QmcConfig | None = None,
                    tail: str = "one") -> CriticalValues:
    u = critical_u(alpha, sigma_T(C, D), gamma, cfg, tail)
    v, kinv = critical_v(alpha, C, D, gamma, cfg, tail)
    return CriticalValues(u, v, kinv)


def _gamma(D, gamma):
    if gamma is not None:
        return gamma
    d = np.asarray(D, float)
    d = np.diag(d) if d.ndim == 2 else d
    return int(round(np.sum(1.0 / d))) - d.size


def power_T(mu, sigma2, C, D, gamma=None, alpha=0.05, cfg: QmcConfig | None = None,
            tail: str = "one", crit: CriticalValues | None = None) -> PowerResult:
    """Power of the maximum contrast test: ``1 - P(T <= u_alpha)`` under ``lambda_T``.

    ``gamma`` defaults to ``sum(n_i) - a`` derived from ``D``.
    """
    cfg = cfg or POWER_QMC
    gamma = _gamma(D, gamma)
    sig = sigma_T(C, D)
    u = crit.u_alpha if crit else critical_u(alpha, sig, gamma, cfg, tail)
    lam = noncentrality("T", mu, sigma2, C, D)
    p, est = _tail_prob(np.ones(sig.m), sig, gamma, cfg, tail, delta=lam, scale=u)
    return PowerResult(p, est.est_error, "T")


def power_S(mu, sigma2, C, D, gamma=None, alpha=0.05, cfg: QmcConfig | None = None,
            tail: str = "one", crit: CriticalValues | None = None,
            parametrization: str = "T") -> PowerResult:
    """Power of the modified maximum contrast test.

    ``parametrization="T"`` integrates ``T`` under ``lambda_T`` up to
    ``K_S^{-1} v_alpha``; ``"S"`` integrates ``S`` under ``Sigma_S``,
    ``lambda_S`` up to ``v_alpha``.  The two are the same probability.
    """
    cfg = cfg or POWER_QMC
    gamma = _gamma(D, gamma)
    if crit is None:
        v, kinv = critical_v(alpha, C, D, gamma, cfg, tail)
    else:
        v, kinv = crit.v_alpha, crit.k_inv
    if parametrization == "T":
        lam = noncentrality("T", mu, sigma2, C, D)
        p, est = _tail_prob(kinv, sigma_T(C, D), gamma, cfg, tail, delta=lam, scale=v)
    elif parametrization == "S":
        lam = noncentrality("S", mu, sigma2, C, D)
        p, est = _tail_prob(np.ones(kinv.size), sigma_S(C, D), gamma, cfg, tail, delta=lam, scale=v)
    else:
        raise ValueError("parametrization must be 'T' or 'S'")
    return PowerResult(p, est.est_error, "S")


def priority_index(C, D) -> int:
    """0-based index of the contrast with the smallest ``sqrt(c'c / c'Dc)``,
    i.e. the one ``S_max`` favours (first index on ties)."""
    kinv = k_inverse(C, D)
    return int(np.flatnonzero(np.isclose(kinv, kinv.min(), rtol=1e-12, atol=0))[0])


def r_tp(method: str, k_true: int, delta: float, sigma2, C, D, gamma=None, alpha=0.05,
         mc_count: int = 1_000_000, seed=0, cfg: QmcConfig | None = None, tail: str = "one",
         crit: CriticalValues | None = None, chunk: int = 250_000,
         competitors=None) -> RtpResult:
    """Probability of rejecting and selecting contrast ``k_true`` when ``mu = delta * c_{k_true}``.

    Monte-Carlo over ``mc_count`` draws of the T vector; the S vector is
    ``T / k_inv`` (same draws for both methods given the seed).  The selection
    event is non-strict: ``X_k >= X_l`` for every ``l`` in ``competitors``
    (default: all rows, i.e. ``k_true`` is the argmax).  Passing a subset
    drops comparisons; ``competitors=[2]`` with ``k_true=1`` gives the
    "dominant beats recessive" event that ignores the additive row.
    """
    method = method.upper()
    if method not in ("T", "S"):
        raise ValueError("method must be 'T' or 'S'")
    c = _coef(C)
    if not 0 <= k_true < c.shape[0]:
        raise ValueError("k_true out of range")
    cfg = cfg or POWER_QMC
    gamma = _gamma(D, gamma)
    crit = crit or critical_values(alpha, C, D, gamma, cfg, tail)
    mu = delta * c[k_true]
    lam = noncentrality("T", mu, sigma2, C, D)
    sig = sigma_T(C, D)
    rng = np.random.default_rng(seed)
    hits = rejections = 0
    done = 0
    while done < mc_count:
        b = min(chunk, mc_count - done)
        x = mvdist.sample_statistics("T", sig, gamma, lam, b, rng)
        threshold = crit.u_alpha
        if method == "S":
            x = x / crit.k_inv
            threshold = crit.v_alpha
        if tail == "two":
            x = np.hstack([x, -x])
        xmax = x.max(axis=1)
        reject = xmax >= threshold
        rejections += int(reject.sum())
        if competitors is None:
            selected = x[:, k_true] >= xmax
        else:
            selected = np.all(x[:, [k_true]] >= x[:, list(competitors)], axis=1)
        hits += int(np.sum(reject & selected))
        done += b
    est, pw = hits / mc_count, rejections / mc_count
    return RtpResult(est, float(np.sqrt(est * (1 - est) / mc_count)), pw,
                     float(np.sqrt(pw * (1 - pw) / mc_count)), mc_count, method)


def r_tp_qmc(method: str, k_true: int, delta: float, sigma2, C, D, gamma=None, alpha=0.05,
             cfg: QmcConfig | None = None, crit: CriticalValues | None = None):
    """One-sided true-pattern rate by QMC instead of simulation.

    The event ``{X_k >= threshold_k, X_k >= X_l for all l}`` is a rectangle for
    the linear image ``A T`` (rows ``-e_k`` and ``e_l - e_k``), and ``A T`` is
    again a noncentral multivariate t, so :func:`mvdist.mvt_cdf` applies.
    Returns a :class:`~maxcon.mvdist.ProbEstimate`.
    """
    method = method.upper()
    cfg = cfg or POWER_QMC
    gamma = _gamma(D, gamma)
    c = _coef(C)
    m = c.shape[0]
    crit = crit or critical_values(alpha, C, D, gamma, cfg)
    lam = noncentrality("T", delta * c[k_true], sigma2, C, D)
    sig = sigma_T(C, D).matrix
    # on the T scale S_l <= S_k  <=>  T_l / kinv_l <= T_k / kinv_k
    w = crit.k_inv if method == "S" else np.ones(m)
    thr = crit.thresholds_S[k_true] if method == "S" else crit.u_alpha
    A = np.zeros((m, m))
    A[0, k_true] = -1.0
    others = [l for l in range(m) if l != k_true]
    for row, l in enumerate(others, start=1):
        A[row, l] = 1.0 / w[l]
        A[row, k_true] = -1.0 / w[k_true]
    upper = np.zeros(m)
    upper[0] = -thr
    return mvdist.mvt_cdf(upper, A @ sig @ A.T, gamma, delta=A @ lam, cfg=cfg)


def rejection_grid(method: str, mu, sigma2, C, D, axes=(1, 2), gamma=None, alpha=0.05,
                   lim=(-4.0, 6.0), num=101, cfg: QmcConfig | None = None,
                   crit: CriticalValues | None = None):
    """Density of two T components on a grid plus the rejection / true-pattern regions.

    Data behind contour plots of the rejection region: returns ``(x, y, density,
    reject, selects)`` where ``density`` is the bivariate noncentral-t density of
    ``(T_i, T_j)`` evaluated by 1-d quadrature over the chi scale, and the two
    boolean masks describe the full T vector reconstructed from ``(T_i, T_j)``
    when rank(Sigma_T) == 2.
    """
    from scipy import integrate, stats

    cfg = cfg or POWER_QMC
    gamma = _gamma(D, gamma)
    crit = crit or critical_values(alpha, C, D, gamma, cfg)
    i, j = axes
    sig = sigma_T(C, D).matrix
    lam = noncentrality("T", mu, sigma2, C, D)
    sub = sig[np.ix_([i, j], [i, j])]
    grid = np.linspace(lim[0], lim[1], num)
    gx, gy = np.meshgrid(grid, grid)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)

    def integrand(s):
        # T = Z / s with Z ~ N(lam, sub): density s^2 phi2(s t - lam) times chi density of s
        z = s * pts - lam[[i, j]]
        dens = stats.multivariate_normal(mean=np.zeros(2), cov=sub).pdf(z) * s ** 2
        return dens * 2 * s * gamma * stats.chi2.pdf(gamma * s * s, gamma)

    dens, _ = integrate.quad_vec(integrand, 0, np.inf, epsabs=1e-10)
    # remaining components from the 2-d subspace: T_rest = B (T_i, T_j)
    B = sig[:, [i, j]] @ np.linalg.inv(sub)
    full = pts @ B.T
    if method.upper() == "S":
        full = full / crit.k_inv
        thr = crit.v_alpha
    else:
        thr = crit.u_alpha
    reject = full.max(axis=1) >= thr
    selects = np.argmax(full, axis=1)
    shape = gx.shape
    return grid, grid, dens.reshape(shape), reject.reshape(shape), selects.reshape(shape)


__all__ = [
    "CriticalValues", "PowerResult", "RtpResult", "POWER_QMC", "noncentrality", "critical_u",
    "critical_v", "critical_values", "power_T", "power_S", "priority_index", "r_tp", "r_tp_qmc",
    "rejection_grid", "ContrastMatrix",
]
