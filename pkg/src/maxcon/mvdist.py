"""Multivariate normal and t probabilities, null density and samplers.

Rectangle probabilities are computed with the separation-of-variables transform
(Genz 1992; Genz & Bretz 1999, 2002) on a rank-revealing Cholesky factor, so
singular covariance matrices are handled by integrating over the ``r``-dimensional
subspace that carries the mass.  Integration uses a Richtmyer (Kronecker) rule
with independent uniform random shifts and antithetic pairs; the error estimate
is ``confidence_mult`` times the standard error across shifts.

The noncentral t used throughout is ``X = Z / sqrt(W / nu)`` with
``Z ~ N(delta, Sigma)`` and ``W ~ chi2(nu)`` independent, i.e. the noncentrality
sits in the numerator (the distribution of studentized contrasts).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DimensionMismatch, IndefiniteMatrix, NotSymmetric, SingularSigma

_EPS = np.finfo(float).eps
_TINY = 1e-300


@dataclass(frozen=True)
class CovarianceModel:
    """Symmetric PSD matrix with a rank-revealing factor.

    ``factor`` is ``m x r`` in the original row order and satisfies
    ``factor @ factor.T ~= matrix``.  ``order`` is the pivot sequence used to
    build it; the first ``rank`` entries index the rows that define the
    integration variables.
    """

    matrix: np.ndarray
    factor: np.ndarray
    rank: int
    order: np.ndarray

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_singular(self) -> bool:
        return self.rank < self.m


@dataclass(frozen=True)
class QmcConfig:
    """Integrator settings.

    Parameters
    ----------
    abs_error_tol : float
        Target for ``est_error`` (absolute).
    max_points : int
        Budget of integrand evaluations.
    seed : int
        Seed for the random shifts; identical configs give bit-identical results.
    confidence_mult : float
        Multiplier on the standard error (3.5 ~ 99.95% two-sided).
    n_shifts : int
        Number of independent random shifts.
    """

    abs_error_tol: float = 1e-3
    max_points: int = 2 ** 24
    seed: int = 0
    confidence_mult: float = 3.5
    n_shifts: int = 12

    def __post_init__(self):
        if not self.abs_error_tol > 0:
            raise ValueError("abs_error_tol must be > 0")
        if self.max_points < 1000:
            raise ValueError("max_points must be >= 1000")
        if self.n_shifts < 2:
            raise ValueError("n_shifts must be >= 2")

    def replace(self, **kw) -> "QmcConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class ProbEstimate:
    value: float
    est_error: float
    points_used: int
    converged: bool = True

    @property
    def budget_exhausted(self) -> bool:
        return not self.converged


# --------------------------------------------------------------------------- factorization


def _as_matrix(sigma) -> np.ndarray:
    if isinstance(sigma, CovarianceModel):
        return sigma.matrix
    a = np.atleast_2d(np.asarray(sigma, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"covariance must be square, got shape {a.shape}")
    return a


def _phi_interval(lo, hi):
    """``Phi(hi) - Phi(lo)`` without cancellation in the upper tail."""
    upper_tail = lo > 0
    return np.where(upper_tail, special.ndtr(-lo) - special.ndtr(-hi),
                    special.ndtr(hi) - special.ndtr(lo))


def factorize(sigma, tol: float = 1e-10, lower=None, upper=None) -> CovarianceModel:
    """Pivoted (rank-revealing) Cholesky factorization.

    Without bounds the pivot is the largest remaining diagonal.  With ``lower`` /
    ``upper`` the pivot is the variable whose conditional interval probability is
    smallest (the Genz-Bretz reordering heuristic), which tightens QMC integration.
    Residual diagonals below ``tol * max(diag)`` end the factorization and define
    the rank.

    Raises
    ------
    NotSymmetric, IndefiniteMatrix
    """
    a = _as_matrix(sigma).copy()
    m = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if m else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * scale:
        raise NotSymmetric("covariance matrix is not symmetric")
    a = 0.5 * (a + a.T)
    original = a.copy()
    if m == 0:
        raise DimensionMismatch("empty covariance matrix")
    dmax = float(np.max(np.diag(a)))
    if dmax <= 0:
        if np.min(np.diag(a)) < -tol * max(abs(dmax), 1.0):
            raise IndefiniteMatrix("negative diagonal")
        return CovarianceModel(_frozen(original), _frozen(np.zeros((m, 0))), 0, _frozen_int(np.arange(m)))
    thresh = tol * dmax
    use_bounds = lower is not None or upper is not None
    if use_bounds:
        lo = np.full(m, -np.inf) if lower is None else np.asarray(lower, float).copy()
        hi = np.full(m, np.inf) if upper is None else np.asarray(upper, float).copy()
    order = np.arange(m)
    L = np.zeros((m, m))
    y = np.zeros(m)  # expected values of the chosen integration variables
    r = 0
    for j in range(m):
        resid = np.diag(a)[j:] - np.sum(L[j:, :j] ** 2, axis=1)
        ok = resid > thresh
        if not np.any(ok):
            break
        if use_bounds:
            sd = np.sqrt(np.where(ok, resid, 1.0))
            shift = L[j:, :j] @ y[:j]
            score = _phi_interval((lo[j:] - shift) / sd, (hi[j:] - shift) / sd)
            score = np.where(ok, score, np.inf)
            p = j + int(np.argmin(score))
        else:
            p = j + int(np.argmax(np.where(ok, resid, -np.inf)))
        if p != j:
            a[[j, p]] = a[[p, j]]
            a[:, [j, p]] = a[:, [p, j]]
            L[[j, p]] = L[[p, j]]
            order[[j, p]] = order[[p, j]]
            if use_bounds:
                lo[[j, p]] = lo[[p, j]]
                hi[[j, p]] = hi[[p, j]]
        d = np.sqrt(a[j, j] - np.sum(L[j, :j] ** 2))
        L[j, j] = d
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
        if use_bounds:
            shift = L[j, :j] @ y[:j]
            al, bl = (lo[j] - shift) / d, (hi[j] - shift) / d
            mass = float(_phi_interval(al, bl))
            if mass > 1e-300:
                y[j] = (_phi_pdf(al) - _phi_pdf(bl)) / mass
            else:
                y[j] = al if np.isfinite(al) else bl
        r = j + 1
    factor = np.zeros((m, r))
    factor[order] = L[:, :r]
    resid = original - factor @ factor.T
    rd = np.diag(resid)
    if np.any(rd < -1e-8 * dmax) or np.max(np.abs(resid)) > 1e-8 * max(dmax, 1.0):
        raise IndefiniteMatrix("matrix is not positive semi-definite within tolerance")
    return CovarianceModel(_frozen(original), _frozen(factor), r, _frozen_int(order))


def _phi_pdf(x):
    x = np.asarray(x, float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-0.5 * x * x) / np.sqrt(2 * np.pi)
    return np.where(np.isfinite(x), out, 0.0)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _frozen_int(a):
    a = np.array(a, dtype=int)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- integrand


class _Rectangle:
    """Constraint structure for ``lower <= delta + L y <= upper`` scaled by ``s``.

    Each row of the pivoted factor is attached to its last nonzero column; all rows
    attached to column ``j`` bound the ``j``-th integration variable.
    """

    def __init__(self, model: CovarianceModel, lower, upper, delta):
        L = model.factor[model.order]  # pivot order: lower trapezoidal
        r = model.rank
        self.r = r
        lower, upper, delta = lower[model.order], upper[model.order], delta[model.order]
        size = np.sqrt(np.max(np.diag(model.matrix)))
        nz = np.abs(L) > 1e-9 * size
        self.columns = []
        degenerate = []
        for i in range(L.shape[0]):
            idx = np.flatnonzero(nz[i])
            if idx.size == 0:
                degenerate.append(i)
        for j in range(r):
            rows = [i for i in range(L.shape[0]) if np.flatnonzero(nz[i]).size and np.flatnonzero(nz[i])[-1] == j]
            rows = np.array(rows, dtype=int)
            piv = L[rows, j]
            flip = piv < 0
            lo = np.where(flip, upper[rows], lower[rows])
            hi = np.where(flip, lower[rows], upper[rows])
            self.columns.append(dict(coef=L[rows, :j] / piv[:, None], piv=np.abs(piv),
                                     lo=lo, hi=hi, flip=flip, delta=delta[rows], sign=np.where(flip, -1.0, 1.0)))
        self.degenerate = [(lower[i], upper[i], delta[i]) for i in degenerate]

    def evaluate(self, w, s):
        """Integrand at points ``w`` (n x r-1) with chi scale ``s`` (n,)."""
        n = s.shape[0]
        f = np.ones(n)
        for lo_i, hi_i, dl in self.degenerate:
            f *= ((_scaled(s, lo_i) <= dl) & (dl <= _scaled(s, hi_i))).astype(float)
        y = np.empty((n, max(self.r - 1, 0)))
        for j, col in enumerate(self.columns):
            shift = y[:, :j] @ col["coef"].T if j else 0.0
            # row bound: (s*b - delta)/piv*sign - coef.y ; flipped rows negate the constraint
            sgn = col["sign"]
            lo_b = (sgn * (_scaled_vec(s, col["lo"]) - col["delta"])) / col["piv"] - shift
            hi_b = (sgn * (_scaled_vec(s, col["hi"]) - col["delta"])) / col["piv"] - shift
            lo = np.max(lo_b, axis=1)
            hi = np.min(hi_b, axis=1)
            hi = np.maximum(hi, lo)
            mass = _phi_interval(lo, hi)
            f *= mass
            if j < self.r - 1:
                y[:, j] = _sample_truncated(lo, hi, mass, w[:, j])
        return f


def _scaled(s, b):
    if np.isinf(b):
        return np.full_like(s, b)
    return s * b


def _scaled_vec(s, b):
    # s: (n,), b: (k,) -> (n, k); infinite bounds stay infinite for s > 0
    out = s[:, None] * b[None, :]
    return np.where(np.isinf(b)[None, :], b[None, :], out)


def _sample_truncated(lo, hi, mass, w):
    """Inverse-CDF draw of a standard normal restricted to ``[lo, hi]``."""
    upper_tail = lo > 0
    with np.errstate(invalid="ignore"):
        d = np.where(upper_tail, special.ndtr(-lo), special.ndtr(lo))
        p = np.where(upper_tail, d - w * mass, d + w * mass)
    p = np.clip(p, _TINY, 1 - _EPS)
    y = special.ndtri(p)
    y = np.where(upper_tail, -y, y)
    return np.where(mass > 0, np.clip(y, lo, hi), np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)))


# --------------------------------------------------------------------------- QMC driver


def _primes(n):
    out, k = [], 2
    while len(out) < n:
        if all(k % p for p in out if p * p <= k):
            out.append(k)
        k += 1
    return np.array(out, dtype=float)


def _richtmyer(dim):
    return np.sqrt(_primes(dim)) % 1.0


def _chi_scale(u, nu):
    """``sqrt(chi2_nu^{-1}(u) / nu)``."""
    return np.sqrt(2.0 * special.gammaincinv(0.5 * nu, u) / nu)


def _integrate(rect: _Rectangle, nu: float, cfg: QmcConfig) -> ProbEstimate:
    t_dist = np.isfinite(nu)
    dim = max(rect.r - 1, 0) + (1 if t_dist else 0)
    if dim == 0:
        value = float(rect.evaluate(np.empty((1, 0)), np.ones(1))[0])
        return ProbEstimate(min(max(value, 0.0), 1.0), 0.0, 1, True)
    rng = np.random.default_rng(cfg.seed)
    shifts = rng.random((cfg.n_shifts, dim))
    alpha = _richtmyer(dim)
    sums = np.zeros(cfg.n_shifts)
    n_done = 0
    batch = 256
    used = 0
    while True:
        k = np.arange(n_done + 1, n_done + batch + 1, dtype=float)[:, None]
        base = (k * alpha) % 1.0
        for q in range(cfg.n_shifts):
            x = np.abs(2.0 * ((base + shifts[q]) % 1.0) - 1.0)
            acc = 0.0
            for pts in (x, 1.0 - x):
                pts = np.clip(pts, _EPS, 1 - _EPS)
                if t_dist:
                    s = _chi_scale(pts[:, 0], nu)
                    w = pts[:, 1:]
                else:
                    s = np.ones(pts.shape[0])
                    w = pts
                acc += float(np.sum(rect.evaluate(w, s)))
            sums[q] += 0.5 * acc
        n_done += batch
        used += 2 * batch * cfg.n_shifts
        est = sums / n_done
        value = float(np.mean(est))
        err = cfg.confidence_mult * float(np.std(est, ddof=1)) / np.sqrt(cfg.n_shifts)
        if err <= cfg.abs_error_tol:
            converged = True
            break
        if used >= cfg.max_points:
            converged = False
            break
        batch = min(batch * 2, max((cfg.max_points - used) // (2 * cfg.n_shifts), 1))
    return ProbEstimate(min(max(value, 0.0), 1.0), err, used, converged)


def _prepare(upper, sigma, delta, lower):
    mat = _as_matrix(sigma)
    m = mat.shape[0]
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (m,)).copy() if np.ndim(upper) == 0 \
        else np.asarray(upper, dtype=float).ravel()
    lower = np.full(m, -np.inf) if lower is None else (
        np.full(m, float(lower)) if np.ndim(lower) == 0 else np.asarray(lower, dtype=float).ravel())
    delta = np.zeros(m) if delta is None else np.asarray(delta, dtype=float).ravel()
    for name, v in (("upper", upper), ("lower", lower), ("delta", delta)):
        if v.shape != (m,):
            raise DimensionMismatch(f"{name} has length {v.size}, expected {m}")
    if np.any(np.isnan(upper)) or np.any(np.isnan(lower)):
        raise ValueError("bounds must not be NaN")
    return mat, upper, lower, delta


def mvt_cdf(upper, sigma, nu: float, delta=None, cfg: QmcConfig | None = None, lower=None) -> ProbEstimate:
    """``P(lower <= X <= upper)`` for ``X = Z / sqrt(W / nu)``, ``Z ~ N(delta, sigma)``.

    Parameters
    ----------
    upper : array_like or float
        Upper limits; ``np.inf`` allowed.
    sigma : array_like or CovarianceModel
        Scale matrix, possibly singular.
    nu : float
        Degrees of freedom (``>= 1``); ``np.inf`` gives the normal case.
    delta : array_like, optional
        Noncentrality (mean of ``Z``).  Default zero.
    cfg : QmcConfig, optional
    lower : array_like or float, optional
        Lower limits, default ``-inf``.

    Returns
    -------
    ProbEstimate
        ``converged`` is False when the tolerance was not met within ``max_points``.
    """
    cfg = cfg or QmcConfig()
    if not nu >= 1:
        raise ValueError("degrees of freedom must be >= 1")
    mat, upper, lower, delta = _prepare(upper, sigma, delta, lower)
    if np.any(lower >= upper):
        return ProbEstimate(0.0, 0.0, 0, True)
    scale = np.sqrt(np.maximum(np.diag(mat), 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        centre_lo = np.where(scale > 0, (lower - delta) / np.where(scale > 0, scale, 1), lower)
        centre_hi = np.where(scale > 0, (upper - delta) / np.where(scale > 0, scale, 1), upper)
    model = factorize(mat, lower=centre_lo, upper=centre_hi)
    rect = _Rectangle(model, lower, upper, delta)
    if rect.r == 0:
        ok = all(lo <= dl <= hi for lo, hi, dl in rect.degenerate) if not np.isfinite(nu) else None
        if ok is not None:
            return ProbEstimate(float(ok), 0.0, 0, True)
    return _integrate(rect, float(nu), cfg)


def mvn_cdf(upper, sigma, mean=None, cfg: QmcConfig | None = None, lower=None) -> ProbEstimate:
    """``P(lower <= Z <= upper)`` for ``Z ~ N(mean, sigma)``; see :func:`mvt_cdf`."""
    return mvt_cdf(upper, sigma, np.inf, delta=mean, cfg=cfg, lower=lower)


def mvt_null_density(s, sigma, gamma: float) -> np.ndarray:
    """Central multivariate t density with scale matrix ``sigma`` and ``gamma`` dof.

    ``s`` may be a single point (length ``m``) or an ``(n, m)`` array of points.

    Raises
    ------
    SingularSigma
        If ``sigma`` is rank deficient (no density w.r.t. Lebesgue measure).
    """
    mat = _as_matrix(sigma)
    m = mat.shape[0]
    model = sigma if isinstance(sigma, CovarianceModel) else factorize(mat)
    if model.rank < m:
        raise SingularSigma(f"scale matrix has rank {model.rank} < {m}")
    pts = np.asarray(s, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts.reshape(-1, m) if pts.ndim <= 1 else pts)
    if pts.shape[1] != m:
        raise DimensionMismatch(f"points have dimension {pts.shape[1]}, expected {m}")
    sign, logdet = np.linalg.slogdet(mat)
    q = np.einsum("ij,ij->i", pts, np.linalg.solve(mat, pts.T).T)
    logc = (special.gammaln(0.5 * (m + gamma)) - special.gammaln(0.5 * gamma)
            - 0.5 * m * np.log(np.pi * gamma) - 0.5 * logdet)
    out = np.exp(logc - 0.5 * (m + gamma) * np.log1p(q / gamma))
    return float(out[0]) if single else out


def sample_statistics(kind: str, sigma, gamma, lam=None, count: int = 1, seed=0) -> np.ndarray:
    """Draw ``count`` vectors of T-, S- or M-like statistics.

    ``"T"`` / ``"S"``: ``(lam + L y) / sqrt(W / gamma)`` with ``W ~ chi2(gamma)``.
    ``"M"``: ``lam + L y`` (``sigma`` already includes the error variance).
    Works for singular ``sigma`` through its rank-revealing factor.
    """
    kind = kind.upper()
    if kind not in ("T", "S", "M"):
        raise ValueError(f"kind must be 'T', 'S' or 'M', got {kind!r}")
    model = sigma if isinstance(sigma, CovarianceModel) else factorize(sigma)
    m = model.m
    lam = np.zeros(m) if lam is None else np.asarray(lam, dtype=float).ravel()
    if lam.shape != (m,):
        raise DimensionMismatch(f"noncentrality has length {lam.size}, expected {m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((count, model.rank)) @ model.factor.T + lam
    if kind == "M":
        return z
    w = rng.chisquare(gamma, size=count)
    return z / np.sqrt(w / gamma)[:, None]
