"""Posterior summaries: density grids, MIAE, CPO, Rand index, VI, ESS."""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DensityGrid:
    """Per-iteration density evaluations on a fixed grid."""

    grid: np.ndarray
    values: np.ndarray  # (iterations, len(grid))

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.values.shape[1] != len(self.grid):
            raise ValueError("value rows must match the grid")

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def band(self, lo: float = 0.05, hi: float = 0.95):
        return (np.quantile(self.values, lo, axis=0),
                np.quantile(self.values, hi, axis=0))

    def iteration_masses(self) -> np.ndarray:
        return np.trapezoid(self.values, self.grid, axis=1)


def miae(grid: np.ndarray, estimate: np.ndarray, truth: np.ndarray) -> float:
    """Integrated absolute error of a density estimate on a shared grid."""
    grid = np.asarray(grid, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != grid.shape or truth.shape != grid.shape:
        raise ValueError("estimate and truth must live on the same grid")
    return float(np.trapezoid(np.abs(estimate - truth), grid))


CpoResult = namedtuple("CpoResult", ["values", "flagged"])


def cpo(point_densities: np.ndarray) -> CpoResult:
    """Harmonic-mean conditional predictive ordinates.

    ``point_densities`` has one row per retained iteration and one column
    per data point.  Points with any zero per-iteration density have no
    harmonic mean; they come back NaN and flagged.
    """
    dens = np.atleast_2d(np.asarray(point_densities, dtype=float))
    flagged = np.any(dens <= 0.0, axis=0)
    values = np.full(dens.shape[1], np.nan)
    ok = ~flagged
    if np.any(ok):
        values[ok] = 1.0 / np.mean(1.0 / dens[:, ok], axis=0)
    return CpoResult(values, flagged)


def alcpo(point_densities: np.ndarray) -> float:
    """Average log CPO over non-flagged points."""
    res = cpo(point_densities)
    vals = res.values[~res.flagged]
    if len(vals) == 0:
        raise ValueError("no valid CPO values")
    return float(np.mean(np.log(vals)))


def mlcpo(point_densities: np.ndarray) -> float:
    """Median log CPO over non-flagged points."""
    res = cpo(point_densities)
    vals = res.values[~res.flagged]
    if len(vals) == 0:
        raise ValueError("no valid CPO values")
    return float(np.median(np.log(vals)))


def _contingency(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    _, i1 = np.unique(p1, return_inverse=True)
    _, i2 = np.unique(p2, return_inverse=True)
    k1 = i1.max() + 1
    k2 = i2.max() + 1
    table = np.zeros((k1, k2))
    np.add.at(table, (i1, i2), 1.0)
    return table


def rand_index(p1, p2) -> float:
    """Fraction of item pairs on which two partitions agree."""
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise ValueError("partitions must have equal length")
    n = len(p1)
    if n < 2:
        raise ValueError("need at least two items")
    table = _contingency(p1, p2)
    same_both = float(np.sum(table * (table - 1.0)) / 2.0)
    same_1 = float(np.sum(table.sum(axis=1) * (table.sum(axis=1) - 1.0)) / 2.0)
    same_2 = float(np.sum(table.sum(axis=0) * (table.sum(axis=0) - 1.0)) / 2.0)
    total = n * (n - 1) / 2.0
    disagree = same_1 + same_2 - 2.0 * same_both
    return float((total - disagree) / total)


def vi_distance(p1, p2) -> float:
    """Variation of information between two partitions (natural log)."""
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise ValueError("partitions must have equal length")
    n = float(len(p1))
    table = _contingency(p1, p2) / n
    r = table.sum(axis=1)
    c = table.sum(axis=0)
    h1 = -float(np.sum(r[r > 0] * np.log(r[r > 0])))
    h2 = -float(np.sum(c[c > 0] * np.log(c[c > 0])))
    nz = table > 0
    mi = float(np.sum(table[nz] * (np.log(table[nz])
                                   - np.log(np.outer(r, c)[nz]))))
    return max(0.0, h1 + h2 - 2.0 * mi)


def vi_point_estimate(partitions: np.ndarray) -> tuple[int, np.ndarray]:
    """Sampled partition minimizing mean VI distance to all samples.

    Returns (iteration index, partition); ties break toward the earliest
    iteration in canonical trace order.
    """
    parts = np.atleast_2d(np.asarray(partitions))
    t = parts.shape[0]
    if t < 1:
        raise ValueError("need at least one sampled partition")
    # deduplicate identical partitions (up to labeling) for the pair loop
    mean_vi = np.zeros(t)
    for a in range(t):
        acc = 0.0
        for b in range(t):
            if a == b:
                continue
            acc += vi_distance(parts[a], parts[b])
        mean_vi[a] = acc / max(t - 1, 1)
    best = int(np.argmin(mean_vi))
    return best, parts[best].copy()


EssResult = namedtuple("EssResult", ["ess", "degenerate"])


def ess(trace) -> EssResult:
    """Effective sample size by the initial-monotone-sequence estimator.

    Autocovariances are summed in adjacent pairs; summation stops at the
    first non-positive pair and the pair sums are forced non-increasing.
    A constant trace carries no information about mixing: its ESS is
    reported as the trace length with the degeneracy flag set.
    """
    x = np.asarray(trace, dtype=float).ravel()
    n = len(x)
    if n < 10:
        raise ValueError("trace too short for an ESS estimate")
    if not np.isfinite(x).all():
        return EssResult(float(n), True)
    x = x - x.mean()
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        return EssResult(float(n), True)
    x = x / scale  # keeps the autocovariance pipeline in floating range
    var0 = float(np.dot(x, x)) / n
    if var0 <= 1e-26:
        return EssResult(float(n), True)
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    if acov[0] <= 0.0:
        return EssResult(float(n), True)
    rho = acov / acov[0]
    # Geyer pair sums
    max_pairs = (n - 1) // 2
    gamma_sum = 0.0
    prev = math.inf
    for k in range(max_pairs):
        pair = rho[2 * k + 1] + rho[2 * k + 2]
        if pair < 0:
            break
        pair = min(pair, prev)
        gamma_sum += pair
        prev = pair
    denom = 1.0 + 2.0 * gamma_sum
    return EssResult(float(n / max(denom, 1e-12)), False)


@dataclass
class MetricReport:
    miae: float | None = None
    alcpo: float | None = None
    mlcpo: float | None = None
    rand_index: float | None = None
    vi_partition: np.ndarray | None = None
    ess_per_stat: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key in ("miae", "alcpo", "mlcpo", "rand_index"):
            val = getattr(self, key)
            if val is not None:
                out[key] = float(val)
        if self.vi_partition is not None:
            out["vi_partition"] = [int(v) for v in self.vi_partition]
        if self.ess_per_stat:
            out["ess_per_stat"] = {k: float(v) for k, v in self.ess_per_stat.items()}
        out.update(self.extra)
        return out
