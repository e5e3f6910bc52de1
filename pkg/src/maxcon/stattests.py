"""Maximum contrast (MCM), modified maximum contrast (MMCM), permuted MMCM and
Kruskal-Wallis tests.

All contrast tests are one-sided in the direction of ``C mu > 0`` by default.
``tail="two"`` stacks ``[C; -C]`` so the max runs over both directions; the
selected row then carries a sign (names of the lower block are prefixed "-").
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import mvdist
from .core import (
    ContrastMatrix,
    GroupedDataset,
    GroupSummary,
    as_dataset,
    default_pg_contrasts,
    summarize,
    validate_contrasts,
)
from .errors import AllTied, DimensionMismatch, EmptyGroup, MaxconError, ZeroVariance
from .mvdist import CovarianceModel, QmcConfig

TAILS = ("one", "two")


@dataclass(frozen=True)
class StatisticVector:
    """Contrast statistics with their maximum and (first) argmax.

    ``argmax`` is a 0-based row index into the contrast matrix that produced
    the values (the augmented one for two-sided tests).
    """

    values: np.ndarray
    max_value: float
    argmax: int
    method: str

    @classmethod
    def from_values(cls, values, method):
        values = np.asarray(values, dtype=float)
        k = int(np.argmax(values))  # first index on ties
        return cls(values, float(values[k]), k, method)


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test on one dataset.

    ``p_error`` is the integrator's error estimate for MCM/MMCM, the permutation
    standard error for pMMCM and 0 for Kruskal-Wallis.  ``aux`` holds
    method-specific extras (``resamples``, ``count`` for pMMCM;
    ``budget_exhausted`` for the QMC methods).
    """

    __test__ = False  # keep pytest from collecting this class

    method: str
    statistic: StatisticVector
    p_value: float
    p_error: float
    selected: int | None = None
    pattern: str | None = None
    aux: dict = field(default_factory=dict)

    @property
    def budget_exhausted(self) -> bool:
        return bool(self.aux.get("budget_exhausted", False))


@dataclass(frozen=True)
class PermutationConfig:
    n_resamp_min: int = 1000
    n_resamp_max: int = 100_000
    eps: float = 1e-3
    confidence_mult: float = 3.5
    seed: int = 0
    add_one: bool = False

    def __post_init__(self):
        if self.n_resamp_min > self.n_resamp_max:
            raise ValueError("n_resamp_min must not exceed n_resamp_max")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


# --------------------------------------------------------------------------- covariance


def _inv_sizes(D) -> np.ndarray:
    if isinstance(D, GroupSummary):
        return np.asarray(D.inv_sizes, float)
    D = np.asarray(D, dtype=float)
    return np.diag(D).copy() if D.ndim == 2 else D


def _coef(C) -> np.ndarray:
    return C.coef if isinstance(C, ContrastMatrix) else np.atleast_2d(np.asarray(C, dtype=float))


def contrast_products(C, D):
    """Return ``(C D C^t, diag(C C^t))``."""
    c, d = _coef(C), _inv_sizes(D)
    if c.shape[1] != d.size:
        raise DimensionMismatch(f"contrast has {c.shape[1]} columns, D has {d.size} groups")
    return (c * d) @ c.T, np.sum(c * c, axis=1)


def k_inverse(C, D) -> np.ndarray:
    """Diagonal of ``K_S^{-1}``: ``sqrt(c'c / c'Dc)`` per contrast."""
    cdc, cc = contrast_products(C, D)
    return np.sqrt(cc / np.diag(cdc))


def sigma_T(C, D) -> CovarianceModel:
    """Correlation matrix of the T statistics: ``c_k'Dc_l / sqrt(c_k'Dc_k c_l'Dc_l)``."""
    cdc, _ = contrast_products(C, D)
    d = np.sqrt(np.diag(cdc))
    return mvdist.factorize(cdc / np.outer(d, d))


def sigma_S(C, D) -> CovarianceModel:
    """Scale matrix of the S statistics: ``c_k'Dc_l / sqrt(c_k'c_k c_l'c_l)``."""
    cdc, cc = contrast_products(C, D)
    n = np.sqrt(cc)
    return mvdist.factorize(cdc / np.outer(n, n))


def sigma_M(C, D, sigma2: float) -> CovarianceModel:
    """Covariance of the M statistics, ``sigma2`` times :func:`sigma_S`."""
    if not sigma2 > 0:
        raise MaxconError("sigma2 must be > 0")
    cdc, cc = contrast_products(C, D)
    n = np.sqrt(cc)
    return mvdist.factorize(sigma2 * cdc / np.outer(n, n))


# --------------------------------------------------------------------------- statistics


def _contrast(C) -> ContrastMatrix:
    return C if isinstance(C, ContrastMatrix) else ContrastMatrix(C)


def compute_T(summary: GroupSummary, C) -> StatisticVector:
    """``T_k = c_k'Ybar / sqrt(V c_k'Dc_k)``."""
    if summary.pooled_variance <= 0:
        raise ZeroVariance("pooled variance is zero")
    c = _coef(C)
    cdc, _ = contrast_products(c, summary.inv_sizes)
    vals = (c @ _centered(summary.means)) / np.sqrt(summary.pooled_variance * np.diag(cdc))
    return StatisticVector.from_values(vals, "T")


def compute_S(summary: GroupSummary, C) -> StatisticVector:
    """``S_k = c_k'Ybar / sqrt(V c_k'c_k)``."""
    if summary.pooled_variance <= 0:
        raise ZeroVariance("pooled variance is zero")
    c = _coef(C)
    vals = (c @ _centered(summary.means)) / np.sqrt(summary.pooled_variance * np.sum(c * c, axis=1))
    return StatisticVector.from_values(vals, "S")


def compute_M(means, C) -> StatisticVector:
    """``M_k = c_k'Ybar / sqrt(c_k'c_k)``."""
    c = _coef(C)
    means = np.asarray(means, dtype=float)
    vals = _m_values(means[None, :], c / np.linalg.norm(c, axis=1)[:, None])[0]
    return StatisticVector.from_values(vals, "M")


def _centered(means):
    # contrasts annihilate constants; removing one explicitly keeps a common
    # shift of the data from leaking in through coefficient rounding
    return means - means[..., :1]


def _m_values(means, cn):
    # explicit loop over groups: identical group assignments give bit-identical output
    means = _centered(means)
    out = np.zeros((means.shape[0], cn.shape[0]))
    for i in range(cn.shape[1]):
        out += means[:, i:i + 1] * cn[:, i][None, :]
    return out


# --------------------------------------------------------------------------- tests


def _setup(ds, C, tail):
    ds = as_dataset(ds)
    if tail not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}, got {tail!r}")
    C = validate_contrasts(_contrast(default_pg_contrasts() if C is None else C), ds.n_groups)
    summary = summarize(ds)
    return ds, C, summary


def _qmc_test(method, stat_fn, sigma_fn, ds, C, cfg, tail):
    ds, C, summary = _setup(ds, C, tail)
    cfg = cfg or QmcConfig()
    base = stat_fn(summary, C)
    sigma = sigma_fn(C, summary.inv_sizes)
    if tail == "one":
        stat = base
        est = mvdist.mvt_cdf(np.full(C.m, stat.max_value), sigma, summary.dof, cfg=cfg)
        names = C.names
    else:
        # max over [C; -C] <= t  <=>  -t <= stat_k <= t for every k
        stat = StatisticVector.from_values(np.concatenate([base.values, -base.values]), base.method)
        t = stat.max_value
        est = mvdist.mvt_cdf(np.full(C.m, t), sigma, summary.dof, cfg=cfg, lower=np.full(C.m, -t))
        names = C.augmented().names
    p = min(max(1.0 - est.value, 0.0), 1.0)
    return TestResult(method, stat, p, est.est_error, stat.argmax, names[stat.argmax],
                      {"budget_exhausted": est.budget_exhausted, "points_used": est.points_used,
                       "dof": summary.dof})


def max_contrast_test(ds, C=None, cfg: QmcConfig | None = None, tail: str = "one") -> TestResult:
    """Maximum contrast method: ``p = 1 - P(T_k < t_max for all k)`` under the
    (possibly singular) multivariate t with scale ``Sigma_T`` and ``gamma`` dof."""
    return _qmc_test("MCM", compute_T, sigma_T, ds, C, cfg, tail)


def modified_max_contrast_test(ds, C=None, cfg: QmcConfig | None = None, tail: str = "one") -> TestResult:
    """Modified maximum contrast method: as :func:`max_contrast_test` with
    ``S_k`` normalized by ``sqrt(V c'c)`` and null scale matrix ``Sigma_S``."""
    return _qmc_test("MMCM", compute_S, sigma_S, ds, C, cfg, tail)


_PERM_BATCH = 2048


def permuted_modified_max_contrast_test(ds, C=None, pcfg: PermutationConfig | None = None,
                                        tail: str = "one") -> TestResult:
    """Permutation p-value for ``M_max`` with sequential stopping.

    Group labels are shuffled over the pooled observations (group sizes fixed).
    Each resample whose ``m_max`` strictly exceeds the observed value (ties up
    to rounding do not count) increments the count; sampling stops at the first ``r > n_resamp_min`` with
    ``confidence_mult * SE < eps``, or at ``n_resamp_max``.
    """
    ds = as_dataset(ds)
    if tail not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}, got {tail!r}")
    C = validate_contrasts(_contrast(default_pg_contrasts() if C is None else C), ds.n_groups)
    for i, g in enumerate(ds.groups):
        if g.size == 0:
            raise EmptyGroup(i)
    if ds.n_total < ds.n_groups + 1:
        raise MaxconError("permutation test needs at least a + 1 observations")
    pcfg = pcfg or PermutationConfig()
    Ceff = C if tail == "one" else C.augmented()
    cn = Ceff.coef / np.linalg.norm(Ceff.coef, axis=1)[:, None]
    values, labels = ds.pooled()
    a, n = ds.n_groups, values.size
    sizes = ds.sizes.astype(float)

    def m_max(label_rows):
        rows = label_rows.shape[0]
        idx = (label_rows + a * np.arange(rows)[:, None]).ravel()
        sums = np.bincount(idx, weights=np.tile(values, rows), minlength=rows * a).reshape(rows, a)
        return _m_values(sums / sizes, cn)

    observed_vals = m_max(labels[None, :])[0]
    stat = StatisticVector.from_values(observed_vals, "M")
    # exact ties (e.g. swapping equal-sized groups under a symmetric contrast)
    # can differ from the observed value by rounding; they must not count
    observed = stat.max_value + 1e-10 * float(np.ptp(values))

    rng = np.random.default_rng(pcfg.seed)
    count = r = 0
    stopped = False
    template = np.broadcast_to(labels, (_PERM_BATCH, n))
    while r < pcfg.n_resamp_max:
        b = min(_PERM_BATCH, pcfg.n_resamp_max - r)
        perms = rng.permuted(template[:b], axis=1)
        exceed = m_max(perms).max(axis=1) > observed
        cum = count + np.cumsum(exceed)
        rr = r + np.arange(1, b + 1)
        p = cum / rr
        se = np.sqrt(p * (1 - p) / rr)
        done = np.flatnonzero((rr > pcfg.n_resamp_min) & (pcfg.confidence_mult * se < pcfg.eps))
        if done.size:
            k = done[0]
            count, r, stopped = int(cum[k]), int(rr[k]), True
            break
        count, r = int(cum[-1]), int(rr[-1])
    p_hat = (count + 1) / (r + 1) if pcfg.add_one else count / r
    se = float(np.sqrt(p_hat * (1 - p_hat) / r))
    return TestResult("pMMCM", stat, float(p_hat), se, stat.argmax, Ceff.names[stat.argmax],
                      {"resamples": r, "count": count, "converged": stopped})


def kruskal_wallis_test(ds) -> TestResult:
    """Kruskal-Wallis H test with tie correction; chi-square(a - 1) p-value."""
    ds = as_dataset(ds)
    for i, g in enumerate(ds.groups):
        if g.size == 0:
            raise EmptyGroup(i)
    values, labels = ds.pooled()
    n, a = values.size, ds.n_groups
    if n < a + 1:
        raise MaxconError("Kruskal-Wallis test needs at least a + 1 observations")
    ranks = stats.rankdata(values)
    _, tie_counts = np.unique(values, return_counts=True)
    correction = 1.0 - np.sum(tie_counts ** 3 - tie_counts) / (n ** 3 - n)
    if correction <= 0:
        raise AllTied("all observations are equal")
    rank_sums = np.bincount(labels, weights=ranks, minlength=a)
    h = (12.0 / (n * (n + 1)) * np.sum(rank_sums ** 2 / ds.sizes) - 3 * (n + 1)) / correction
    p = float(stats.chi2.sf(h, a - 1))
    return TestResult("KW", StatisticVector(np.array([h]), float(h), 0, "H"), p, 0.0)


METHODS = {
    "mcm": max_contrast_test,
    "mmcm": modified_max_contrast_test,
    "pmmcm": permuted_modified_max_contrast_test,
    "kw": kruskal_wallis_test,
}
