"""Data model, contrast algebra and group summary statistics.

Groups are ordered by genotype code (0 = AA, 1 = Aa, 2 = aa).  Log transforms use
the natural logarithm; every statistic in the package is invariant to the base.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    EmptyGroup,
    MaxconError,
    NonPositiveValue,
    RowSumNonZero,
    ZeroRow,
)

ZERO_SUM_TOL = 1e-12

PATTERN_NAMES = ("additive", "dominant", "recessive")

#: Coefficients of every response shape used by the simulation designs.
PATTERNS = {
    "additive": (-1 / 2, 0.0, 1 / 2),
    "dominant": (-1 / 3, -1 / 3, 2 / 3),
    "recessive": (-2 / 3, 1 / 3, 1 / 3),
    "valley": (1 / 3, -2 / 3, 1 / 3),
}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupedDataset:
    """Per-group observations, in genotype-code order.

    Parameters
    ----------
    groups : sequence of array_like
        One array of observations per group.
    scale : {"raw", "log"}
        ``"raw"`` for untransformed PK values, ``"log"`` after :func:`log_transform`.
    """

    groups: tuple
    scale: str = "log"

    def __post_init__(self):
        if self.scale not in ("raw", "log"):
            raise MaxconError(f"scale must be 'raw' or 'log', got {self.scale!r}")
        groups = tuple(_frozen(np.ravel(g)) for g in self.groups)
        if len(groups) < 2:
            raise MaxconError("need at least two groups")
        object.__setattr__(self, "groups", groups)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=int)

    @property
    def n_total(self) -> int:
        return int(self.sizes.sum())

    def pooled(self):
        """Return ``(values, labels)``: the concatenated observations and their group index."""
        values = np.concatenate(self.groups)
        labels = np.repeat(np.arange(self.n_groups), self.sizes)
        return values, labels

    def map(self, func) -> "GroupedDataset":
        return GroupedDataset(tuple(func(g) for g in self.groups), self.scale)


@dataclass(frozen=True)
class ContrastMatrix:
    """An ``m x a`` matrix of contrast coefficients, one response shape per row."""

    coef: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coef, dtype=float))
        if c.ndim != 2:
            raise DimensionMismatch("contrast matrix must be two-dimensional")
        object.__setattr__(self, "coef", _frozen(c))
        names = tuple(self.names) if self.names else tuple(f"c{k + 1}" for k in range(c.shape[0]))
        if len(names) != c.shape[0]:
            raise DimensionMismatch(f"{len(names)} names for {c.shape[0]} contrast rows")
        object.__setattr__(self, "names", names)

    @property
    def m(self) -> int:
        return self.coef.shape[0]

    @property
    def a(self) -> int:
        return self.coef.shape[1]

    def augmented(self) -> "ContrastMatrix":
        """Stack ``[C; -C]`` so a one-sided max over the result tests both directions."""
        return ContrastMatrix(np.vstack([self.coef, -self.coef]),
                              self.names + tuple("-" + n for n in self.names))

    def scaled(self, factors) -> "ContrastMatrix":
        return ContrastMatrix(self.coef * np.asarray(factors, float)[:, None], self.names)


@dataclass(frozen=True)
class GroupSummary:
    """Group means, pooled variance, its degrees of freedom and ``diag(D) = 1/n_i``."""

    means: np.ndarray
    pooled_variance: float
    dof: int
    inv_sizes: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return np.rint(1.0 / self.inv_sizes).astype(int)


def log_transform(ds: GroupedDataset) -> GroupedDataset:
    """Natural-log transform of a raw dataset.

    Raises
    ------
    NonPositiveValue
        If any observation is ``<= 0``.
    """
    for i, g in enumerate(ds.groups):
        bad = np.flatnonzero(~(g > 0))
        if bad.size:
            raise NonPositiveValue(i, int(bad[0]))
    return GroupedDataset(tuple(np.log(g) for g in ds.groups), "log")


def default_pg_contrasts() -> ContrastMatrix:
    """Additive, dominant and recessive contrasts for three genotype groups."""
    return ContrastMatrix(np.array([PATTERNS[n] for n in PATTERN_NAMES]), PATTERN_NAMES)


def validate_contrasts(C: ContrastMatrix, n_groups: int | None = None) -> ContrastMatrix:
    """Check zero row sums (to ``1e-12``), no all-zero rows, and optionally the group count."""
    if not isinstance(C, ContrastMatrix):
        C = ContrastMatrix(C)
    if C.m < 1:
        raise DimensionMismatch("contrast matrix has no rows")
    for k, row in enumerate(C.coef):
        if not np.all(np.isfinite(row)):
            raise MaxconError(f"contrast row {k} has non-finite entries")
        if np.all(row == 0):
            raise ZeroRow(k)
        total = row.sum()
        if abs(total) > ZERO_SUM_TOL:
            raise RowSumNonZero(k, total)
    if n_groups is not None and C.a != n_groups:
        raise DimensionMismatch(f"contrast matrix has {C.a} columns but dataset has {n_groups} groups")
    return C


def summarize(ds: GroupedDataset) -> GroupSummary:
    """Means, pooled within-group variance ``V`` and ``gamma = sum(n_i - 1)``."""
    for i, g in enumerate(ds.groups):
        if g.size == 0:
            raise EmptyGroup(i)
    sizes = ds.sizes
    dof = int(np.sum(sizes - 1))
    if dof < 1:
        raise DegenerateVariance("pooled variance needs sum(n_i - 1) >= 1")
    means = np.array([g.mean() for g in ds.groups])
    ss = sum(float(np.sum((g - mu) ** 2)) for g, mu in zip(ds.groups, means))
    return GroupSummary(_frozen(means), ss / dof, dof, _frozen(1.0 / sizes))


def as_dataset(groups: Sequence | GroupedDataset, scale: str = "log") -> GroupedDataset:
    if isinstance(groups, GroupedDataset):
        return groups
    return GroupedDataset(tuple(groups), scale)
