"""Simulation scenarios: Hardy-Weinberg group sizes, pattern-shaped normal
responses, rejection and true-pattern rates, and the MMCM/pMMCM timing bench.

Replicate ``r`` of a scenario draws its data from
``SeedSequence(seed, spawn_key=(r, 0))`` (and its permutation stream from
``spawn_key=(r, 1)``), so any replicate can be regenerated in isolation and
the counts do not depend on how replicates are spread over workers.

Two engines are available.  ``"full"`` calls the test functions once per
replicate and rejects when ``p <= alpha``.  ``"fast"`` computes the critical
values once per scenario and compares every replicate's statistic against
them; this is the same decision up to the integrator's error at the boundary
and is what makes 20 000-replicate tables practical.
"""
from __future__ import annotations

import dataclasses
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import PATTERNS, ContrastMatrix, GroupedDataset, default_pg_contrasts, validate_contrasts
from .errors import MaxconError
from .mvdist import QmcConfig
from .power import POWER_QMC, critical_values
from .stattests import (
    TAILS,
    PermutationConfig,
    kruskal_wallis_test,
    max_contrast_test,
    modified_max_contrast_test,
    permuted_modified_max_contrast_test,
)

SCENARIO_PATTERNS = ("null", "additive", "dominant", "recessive", "valley")
SIM_METHODS = ("MCM", "MMCM", "pMMCM", "KW")
ENGINES = ("fast", "full")

# Tabulated genotype counts (AA, Aa, aa) of the reference designs.
_HWE_TABLE = {
    (0.12, 100): (78, 20, 2),
    (0.12, 300): (234, 61, 5),
    (0.25, 100): (56, 37, 7),
    (0.25, 300): (168, 113, 19),
    (0.33, 100): (44, 44, 12),
    (0.33, 300): (133, 133, 34),
    (0.50, 100): (25, 50, 25),
    (0.50, 300): (75, 150, 75),
}

_FAST_BLOCK = 1000
_CRIT_CACHE: dict = {}
_CRIT_LOCK = threading.Lock()


def _scenario_critical_values(alpha, C, sizes, tail):
    """Critical values are deterministic in their inputs, so scenarios that share
    group sizes (e.g. the Delta sweep of one table row) share one solve."""
    key = (float(alpha), tuple(int(x) for x in sizes), tail, C.coef.tobytes(), C.coef.shape)
    with _CRIT_LOCK:
        if key not in _CRIT_CACHE:
            gamma = int(np.sum(sizes)) - len(sizes)
            _CRIT_CACHE[key] = critical_values(alpha, C, 1.0 / np.asarray(sizes, float), gamma,
                                               POWER_QMC, tail)
        return _CRIT_CACHE[key]


def hwe_group_sizes(maf: float, n_total: int) -> tuple[int, int, int]:
    """Genotype group sizes ``(n_AA, n_Aa, n_aa)`` for a minor allele frequency.

    The eight reference (MAF, n) designs are returned as tabulated.
    Otherwise the expected counts ``(p^2, 2pq, q^2) n`` with ``p = 1 - maf``
    are floored and the remaining units go to the largest fractional parts
    (earlier groups first on ties).
    """
    if not 0 < maf <= 0.5:
        raise ValueError("maf must lie in (0, 0.5]")
    n_total = int(n_total)
    if n_total < 0:
        raise ValueError("n_total must be >= 0")
    key = (round(float(maf), 10), n_total)
    if key in _HWE_TABLE:
        return _HWE_TABLE[key]
    p = 1.0 - maf
    expected = np.array([p * p, 2 * p * maf, maf * maf]) * n_total
    sizes = np.floor(expected).astype(int)
    short = n_total - int(sizes.sum())
    order = np.argsort(-(expected - sizes), kind="stable")
    sizes[order[:short]] += 1
    return tuple(int(s) for s in sizes)


def pattern_means(pattern: str, delta: float) -> np.ndarray:
    """Population means ``delta * c`` of the generating pattern (zeros for null)."""
    if pattern == "null":
        return np.zeros(3)
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    return float(delta) * np.asarray(PATTERNS[pattern], dtype=float)


def _replicate_seq(seed: int, r: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(r, stream))


def _draw(means, sizes, seq) -> np.ndarray:
    rng = np.random.default_rng(seq)
    return rng.standard_normal(int(np.sum(sizes))) + np.repeat(means, sizes)


def generate_dataset(pattern: str, delta: float, sizes, seed=0) -> GroupedDataset:
    """Group ``i`` gets ``n_i`` independent ``N(delta * c_i, 1)`` draws.

    ``seed`` is an int or a ``SeedSequence``; the values are already on the
    analysis (log) scale.
    """
    sizes = np.asarray(sizes, dtype=int)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    flat = _draw(pattern_means(pattern, delta), sizes, seq)
    return GroupedDataset(tuple(np.split(flat, np.cumsum(sizes)[:-1])), scale="log")


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation cell.

    ``n_total`` is split by :func:`hwe_group_sizes` unless ``sizes`` is given.
    ``workers`` only affects speed.
    """

    maf: float
    n_total: int
    pattern: str
    delta: float = 0.0
    methods: tuple = ("MCM", "MMCM", "KW")
    reps: int = 2000
    alpha: float = 0.05
    seed: int = 0
    tail: str = "two"
    engine: str = "fast"
    sizes: tuple | None = None
    contrasts: ContrastMatrix | None = None
    qmc: QmcConfig = field(default_factory=QmcConfig)
    perm: PermutationConfig = field(default_factory=PermutationConfig)
    workers: int = 1

    def __post_init__(self):
        if self.pattern not in SCENARIO_PATTERNS:
            raise ValueError(f"pattern must be one of {SCENARIO_PATTERNS}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.pattern == "null" and self.delta != 0:
            raise ValueError("the null pattern has delta = 0")
        if self.reps < 0:
            raise ValueError("reps must be >= 0")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tail not in TAILS:
            raise ValueError(f"tail must be one of {TAILS}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        bad = [m for m in self.methods if m not in SIM_METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {SIM_METHODS}, got {self.methods}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def group_sizes(self) -> tuple:
        return tuple(self.sizes) if self.sizes is not None else hwe_group_sizes(self.maf, self.n_total)

    @property
    def contrast_matrix(self) -> ContrastMatrix:
        return validate_contrasts(self.contrasts or default_pg_contrasts(), 3)

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class MethodMetrics:
    """Counts for one method in one scenario.

    ``selections`` counts, among rejections, how often each row of the
    effective contrast matrix (``[C; -C]`` when two-sided) attained the max.
    ``n_tp`` is ``None`` for Kruskal-Wallis and whenever the generating
    pattern is not a row of ``C``.
    """

    method: str
    n: int
    n_p: int
    n_tp: int | None
    selections: tuple | None
    selection_names: tuple | None
    seconds: float
    n_budget: int = 0

    @property
    def r_p(self) -> float:
        return self.n_p / self.n if self.n else float("nan")

    @property
    def r_tp(self) -> float | None:
        if self.n_tp is None:
            return None
        return self.n_tp / self.n if self.n else float("nan")

    def pattern_selections(self) -> tuple | None:
        """Selections per contrast with the two directions of a row pooled."""
        if self.selections is None:
            return None
        sel = np.asarray(self.selections)
        m = len(sel) // 2 if any(n.startswith("-") for n in self.selection_names) else len(sel)
        return tuple(int(x) for x in sel[:m] + (sel[m:] if len(sel) > m else 0))


@dataclass(frozen=True)
class ScenarioMetrics:
    config: ScenarioConfig
    methods: dict

    def __getitem__(self, method) -> MethodMetrics:
        return self.methods[method]

    def fp(self, method) -> float | None:
        """False-positive rate: the rejection rate of a valley scenario."""
        return self.methods[method].r_p if self.config.pattern == "valley" else None


def _true_index(cfg: ScenarioConfig, C: ContrastMatrix) -> int | None:
    if cfg.pattern in ("null", "valley") or cfg.delta == 0:
        return None
    target = np.asarray(PATTERNS[cfg.pattern], dtype=float)
    for k, row in enumerate(C.coef):
        if np.allclose(row, target, atol=1e-12):
            return k
    return None


class _Tally:
    def __init__(self, n_rows):
        self.n_p = 0
        self.sel = np.zeros(n_rows, dtype=np.int64) if n_rows else None
        self.budget = 0
        self.seconds = 0.0

    def add(self, other):
        self.n_p += other.n_p
        if self.sel is not None:
            self.sel += other.sel
        self.budget += other.budget
        self.seconds += other.seconds


def _block_fast(cfg, C, crit, kw_crit, rows, means, sizes, reps_range):
    a = sizes.size
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    n = int(sizes.sum())
    gamma = n - a
    out = {m: _Tally(rows if m != "KW" else 0) for m in cfg.methods}
    data = np.stack([_draw(means, sizes, _replicate_seq(cfg.seed, r, 0)) for r in reps_range])
    labels = np.repeat(np.arange(a), sizes)
    if "MCM" in cfg.methods or "MMCM" in cfg.methods:
        t0 = time.perf_counter()
        gmeans = np.add.reduceat(data, starts, axis=1) / sizes
        resid = data - gmeans[:, labels]
        v = np.sum(resid * resid, axis=1) / gamma
        num = gmeans @ C.coef.T
        shared = time.perf_counter() - t0
        for name, denom, thr in (("MCM", (C.coef ** 2 / sizes) @ np.ones(a), crit.u_alpha),
                                 ("MMCM", np.sum(C.coef ** 2, axis=1), crit.v_alpha)):
            if name not in cfg.methods:
                continue
            t0 = time.perf_counter()
            z = num / np.sqrt(v[:, None] * denom[None, :])
            if cfg.tail == "two":
                z = np.concatenate([z, -z], axis=1)
            k = np.argmax(z, axis=1)
            rej = z[np.arange(z.shape[0]), k] >= thr
            tally = out[name]
            tally.n_p = int(rej.sum())
            tally.sel = np.bincount(k[rej], minlength=rows).astype(np.int64)
            tally.seconds = shared + time.perf_counter() - t0
    if "KW" in cfg.methods:
        t0 = time.perf_counter()
        ranks = stats.rankdata(data, axis=1)
        rsum = np.add.reduceat(ranks, starts, axis=1)
        h = 12.0 / (n * (n + 1)) * np.sum(rsum ** 2 / sizes, axis=1) - 3 * (n + 1)
        ordered = np.sort(data, axis=1)
        tied = np.flatnonzero(np.any(np.diff(ordered, axis=1) == 0, axis=1))
        for i in tied:  # exact ties are rare with continuous draws
            ds = GroupedDataset(tuple(np.split(data[i], starts[1:])), scale="log")
            h[i] = kruskal_wallis_test(ds).statistic.max_value
        out["KW"].n_p = int(np.sum(h >= kw_crit))
        out["KW"].seconds = time.perf_counter() - t0
    if "pMMCM" in cfg.methods:
        sub = cfg.replace(methods=("pMMCM",))
        out["pMMCM"] = _block_full(sub, C, rows, means, sizes, reps_range)["pMMCM"]
    return out


def _block_full(cfg, C, rows, means, sizes, reps_range):
    out = {m: _Tally(rows if m != "KW" else 0) for m in cfg.methods}
    splits = np.cumsum(sizes)[:-1]
    for r in reps_range:
        flat = _draw(means, sizes, _replicate_seq(cfg.seed, r, 0))
        ds = GroupedDataset(tuple(np.split(flat, splits)), scale="log")
        for name in cfg.methods:
            t0 = time.perf_counter()
            try:
                if name == "MCM":
                    res = max_contrast_test(ds, C, cfg.qmc, cfg.tail)
                elif name == "MMCM":
                    res = modified_max_contrast_test(ds, C, cfg.qmc, cfg.tail)
                elif name == "pMMCM":
                    pseed = int(_replicate_seq(cfg.seed, r, 1).generate_state(1)[0])
                    res = permuted_modified_max_contrast_test(
                        ds, C, dataclasses.replace(cfg.perm, seed=pseed), cfg.tail)
                else:
                    res = kruskal_wallis_test(ds)
            except MaxconError as exc:
                raise MaxconError(f"replicate {r}, method {name}: {exc}") from exc
            tally = out[name]
            tally.seconds += time.perf_counter() - t0
            tally.budget += int(res.budget_exhausted)
            if res.p_value <= cfg.alpha:
                tally.n_p += 1
                if tally.sel is not None:
                    tally.sel[res.selected] += 1
    return out


def run_scenario(cfg: ScenarioConfig) -> ScenarioMetrics:
    """Run ``cfg.reps`` replicates through every configured method."""
    C = cfg.contrast_matrix
    sizes = np.asarray(cfg.group_sizes, dtype=int)
    if sizes.size != 3 or np.any(sizes < 1):
        raise ValueError(f"need three nonempty groups, got sizes {tuple(sizes)}")
    means = pattern_means(cfg.pattern, cfg.delta)
    eff = C if cfg.tail == "one" else C.augmented()
    rows = eff.m
    k_true = _true_index(cfg, C)

    if cfg.engine == "fast":
        need_crit = cfg.reps > 0 and ("MCM" in cfg.methods or "MMCM" in cfg.methods)
        crit = _scenario_critical_values(cfg.alpha, C, sizes, cfg.tail) if need_crit else None
        kw_crit = float(stats.chi2.isf(cfg.alpha, sizes.size - 1))

        def work(rr):
            return _block_fast(cfg, C, crit, kw_crit, rows, means, sizes, rr)
        block = _FAST_BLOCK
    else:
        def work(rr):
            return _block_full(cfg, C, rows, means, sizes, rr)
        block = max(1, -(-cfg.reps // (4 * cfg.workers))) if cfg.workers > 1 else max(cfg.reps, 1)

    chunks = [range(s, min(s + block, cfg.reps)) for s in range(0, cfg.reps, block)]
    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    totals = {m: _Tally(rows if m != "KW" else 0) for m in cfg.methods}
    for part in parts:
        for m in cfg.methods:
            totals[m].add(part[m])

    metrics = {}
    for m in cfg.methods:
        t = totals[m]
        contrast = m != "KW"
        n_tp = int(t.sel[k_true]) if contrast and k_true is not None else None
        metrics[m] = MethodMetrics(
            method=m, n=cfg.reps, n_p=t.n_p, n_tp=n_tp,
            selections=tuple(int(x) for x in t.sel) if contrast else None,
            selection_names=eff.names if contrast else None,
            seconds=t.seconds, n_budget=t.budget)
    return ScenarioMetrics(cfg, metrics)


@dataclass(frozen=True)
class BenchScenario:
    name: str
    pattern: str
    delta: float
    maf: float
    n_total: int = 300


#: The five timing scenarios (all at n = 300).
BENCH_SCENARIOS = (
    BenchScenario("overall null hypothesis", "null", 0.0, 0.33),
    BenchScenario("(i) additive", "additive", 0.25, 0.12),
    BenchScenario("(ii) dominant", "dominant", 1.0, 0.50),
    BenchScenario("(iii) recessive", "recessive", 0.5, 0.25),
    BenchScenario("(iv) valley", "valley", 0.25, 0.33),
)


@dataclass(frozen=True)
class BenchRow:
    scenario: str
    method: str
    reps: int
    seconds: float
    rejections: int


def bench_timing(scenarios=BENCH_SCENARIOS, reps: int = 100, eps: float = 1e-2, seed: int = 0,
                 alpha: float = 0.05, tail: str = "two", methods=("pMMCM", "MMCM")) -> list[BenchRow]:
    """Summed wall-clock seconds per (scenario, method) over ``reps`` datasets.

    Both methods run single-threaded at absolute error tolerance ``eps``.
    Seconds depend on the machine; only ratios between rows are meaningful.
    """
    if reps == 0:
        return []
    rows = []
    for sc in scenarios:
        cfg = ScenarioConfig(maf=sc.maf, n_total=sc.n_total, pattern=sc.pattern, delta=sc.delta,
                             methods=tuple(methods), reps=reps, alpha=alpha, seed=seed, tail=tail,
                             engine="full", qmc=QmcConfig(abs_error_tol=eps),
                             perm=PermutationConfig(eps=eps), workers=1)
        res = run_scenario(cfg)
        for m in methods:
            rows.append(BenchRow(sc.name, m, reps, res[m].seconds, res[m].n_p))
    return rows
