"""Latent hyper-tie structures: validation, enumeration, label encoding.

A structure is a partial matching between the k unique values of the first
sample and the c unique values of the second.  It is stored as a canonical
tuple of index pairs (i, j): a pair with both indices positive is a
hyper-tie, (i, 0) is an unmatched first-sample value, (0, j) an unmatched
second-sample value.  Pairs are kept sorted (matched pairs by i, then the
(i, 0) block, then the (0, j) block) so equal structures compare equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .base_measures import BaseMeasure, g0_density, p0_density
from .levy import LevySpec, log_tau_vec, psi_b_vec
from .quadrature import QuadratureConfig, integrate_posneg_2d

ENUMERATION_GUARD = 10 ** 6


@dataclass(frozen=True)
class HyperTieState:
    """A compatible hyper-ties structure for (k, c) unique values."""

    pairs: tuple[tuple[int, int], ...]
    k: int
    c: int

    @staticmethod
    def from_pairs(pairs, k: int, c: int) -> "HyperTieState":
        return HyperTieState(canonical_pairs(pairs), k, c)

    @property
    def delta(self) -> tuple[tuple[int, int], ...]:
        """Hyper-tie pairs (both coordinates positive)."""
        return tuple(p for p in self.pairs if p[0] != 0 and p[1] != 0)

    @property
    def delta1(self) -> tuple[tuple[int, int], ...]:
        return tuple(p for p in self.pairs if p[1] == 0)

    @property
    def delta2(self) -> tuple[tuple[int, int], ...]:
        return tuple(p for p in self.pairs if p[0] == 0)


def canonical_pairs(pairs) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((int(i), int(j)) for i, j in pairs))


def validate(p: HyperTieState) -> str | None:
    """None if compatible, else a description of the first violated clause."""
    seen_i = [0] * (p.k + 1)
    seen_j = [0] * (p.c + 1)
    for i, j in p.pairs:
        if i == 0 and j == 0:
            return "pair (0, 0) refers to no unique value"
        if i < 0 or i > p.k or j < 0 or j > p.c:
            return f"pair ({i}, {j}) is out of range for k={p.k}, c={p.c}"
        if i > 0:
            seen_i[i] += 1
            if seen_i[i] > 1:
                return f"first-sample index {i} appears in more than one pair"
        if j > 0:
            seen_j[j] += 1
            if seen_j[j] > 1:
                return f"second-sample index {j} appears in more than one pair"
    for i in range(1, p.k + 1):
        if seen_i[i] == 0:
            return f"first-sample index {i} appears in no pair"
    for j in range(1, p.c + 1):
        if seen_j[j] == 0:
            return f"second-sample index {j} appears in no pair"
    return None


def structure_count(k: int, c: int) -> int:
    """Number of compatible structures: sum_j C(k,j) C(c,j) j!."""
    return sum(math.comb(k, j) * math.comb(c, j) * math.factorial(j)
               for j in range(0, min(k, c) + 1))


def enumerate_structures(k: int, c: int) -> list[HyperTieState]:
    """All compatible structures for k and c unique values."""
    if k + c < 1:
        raise ValueError("need at least one unique value")
    total = structure_count(k, c)
    if total > ENUMERATION_GUARD:
        raise ValueError(
            f"{total} structures exceed the enumeration guard ({ENUMERATION_GUARD}); "
            "use sampling-based methods instead")
    out = []
    xs = range(1, k + 1)
    ys = range(1, c + 1)
    for j in range(0, min(k, c) + 1):
        for xs_sub in combinations(xs, j):
            for ys_perm in permutations(ys, j):
                pairs = list(zip(xs_sub, ys_perm))
                matched_x = set(xs_sub)
                matched_y = set(ys_perm)
                pairs += [(i, 0) for i in xs if i not in matched_x]
                pairs += [(0, jj) for jj in ys if jj not in matched_y]
                out.append(HyperTieState(canonical_pairs(pairs), k, c))
    return out


@dataclass
class LabelArrays:
    """Integer cluster labels per observation; a shared label is a hyper-tie."""

    c_x: np.ndarray
    c_y: np.ndarray

    def __post_init__(self):
        self.c_x = np.asarray(self.c_x, dtype=int)
        self.c_y = np.asarray(self.c_y, dtype=int)


def labels_to_structure(labels: LabelArrays):
    """Structure plus multiplicities induced by label arrays.

    Returns (structure, n_sizes, m_sizes) where the size vectors follow the
    structure's unique-value indexing (1-based in the pair encoding).
    """
    ux = [int(v) for v in dict.fromkeys(labels.c_x.tolist())]
    uy = [int(v) for v in dict.fromkeys(labels.c_y.tolist())]
    k, c = len(ux), len(uy)
    x_of = {lab: i + 1 for i, lab in enumerate(ux)}
    y_of = {lab: j + 1 for j, lab in enumerate(uy)}
    n_sizes = np.array([int(np.sum(labels.c_x == lab)) for lab in ux])
    m_sizes = np.array([int(np.sum(labels.c_y == lab)) for lab in uy])
    pairs = []
    matched_x, matched_y = set(), set()
    for lab in ux:
        if lab in y_of:
            pairs.append((x_of[lab], y_of[lab]))
            matched_x.add(x_of[lab])
            matched_y.add(y_of[lab])
    pairs += [(i, 0) for i in range(1, k + 1) if i not in matched_x]
    pairs += [(0, j) for j in range(1, c + 1) if j not in matched_y]
    return HyperTieState(canonical_pairs(pairs), k, c), n_sizes, m_sizes


def structure_to_labels(p: HyperTieState, n_sizes, m_sizes) -> LabelArrays:
    """Label arrays realizing a structure with the given multiplicities."""
    n_sizes = np.asarray(n_sizes, dtype=int)
    m_sizes = np.asarray(m_sizes, dtype=int)
    if len(n_sizes) != p.k or len(m_sizes) != p.c:
        raise ValueError("multiplicity vectors must match (k, c)")
    label_of_x = {}
    label_of_y = {}
    next_label = 0
    for i, j in p.pairs:
        if i > 0:
            label_of_x[i] = next_label
        if j > 0:
            label_of_y[j] = next_label
        next_label += 1
    c_x = np.concatenate([[label_of_x[i]] * n_sizes[i - 1] for i in range(1, p.k + 1)]) \
        if p.k else np.zeros(0, dtype=int)
    c_y = np.concatenate([[label_of_y[j]] * m_sizes[j - 1] for j in range(1, p.c + 1)]) \
        if p.c else np.zeros(0, dtype=int)
    return LabelArrays(c_x, c_y)


def structure_mass(p: HyperTieState, spec: LevySpec, g0: BaseMeasure,
                   x_uniques, y_uniques, n_sizes, m_sizes,
                   cfg: QuadratureConfig | None = None) -> float:
    """Unnormalized posterior mass of a structure given the unique values.

    Each pair contributes a total-mass factor theta, the base-measure
    density of its (pair of) unique values, and a tilted jump moment; the
    tilt variables are then integrated out over the positive quadrant.
    Intended for exact checks on small (k, c); the samplers only ever use
    ratios of these masses.
    """
    violation = validate(p)
    if violation is not None:
        raise ValueError(f"invalid structure: {violation}")
    n_sizes = np.asarray(n_sizes, dtype=int)
    m_sizes = np.asarray(m_sizes, dtype=int)
    n = int(np.sum(n_sizes))
    m = int(np.sum(m_sizes))
    if n < 1 or m < 1:
        raise ValueError("need at least one observation in each sample")

    log_geom = len(p.pairs) * math.log(spec.theta)
    counts = []
    for i, j in p.pairs:
        if i > 0 and j > 0:
            dens = g0_density(g0, (x_uniques[i - 1], y_uniques[j - 1]))
        elif i > 0:
            dens = p0_density(g0, x_uniques[i - 1])
        else:
            dens = p0_density(g0, y_uniques[j - 1])
        if dens == 0.0:
            return 0.0
        log_geom += math.log(dens)
        counts.append((n_sizes[i - 1] if i > 0 else 0, m_sizes[j - 1] if j > 0 else 0))

    def integrand(u1, u2):
        u = np.array([u1, u2])
        log_val = (n - 1) * math.log(u1) + (m - 1) * math.log(u2) - psi_b_vec(spec, u)
        for cn, cm in counts:
            log_val += log_tau_vec(spec, np.array([cn, cm]), u)
        return math.exp(log_val)

    cfg = cfg or QuadratureConfig(rel_tol=1e-9, abs_tol=1e-14)
    return math.exp(log_geom) * integrate_posneg_2d(integrand, cfg)
