"""Series simulation of the posterior completely random vector.

Draws truncated trajectories of the unnormalized measure pair given the
latent state: ordered jumps are produced by inverting the tilted tail
integral at unit-rate Poisson arrivals, atoms are base-measure draws, and
the fixed atoms at the observed unique values carry jumps from their
gamma-type conditional laws.  Equal-jumps families need a single Poisson
sequence (the jump copula is degenerate: both coordinates share the jump);
the additive family is simulated as three independent components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base_measures import BaseMeasure, G0Family, conditional, sample_pair
from .levy import LevyFamily, LevySpec, invert_tail_mass, tail_mass


@dataclass
class FKComponent:
    """One truncated series: shared or per-side jumps with their atoms."""

    jumps1: np.ndarray           # coordinate-1 jump sizes
    jumps2: np.ndarray           # coordinate-2 jump sizes
    atoms1: np.ndarray           # coordinate-1 atom locations
    atoms2: np.ndarray           # coordinate-2 atom locations
    residual: float              # expected mass below the truncation level


@dataclass
class FKFixedAtom:
    x: float | None
    y: float | None
    jump1: float
    jump2: float
    kind: str                    # "hyper-tie", "sample1", "sample2"


@dataclass
class FKDraw:
    components: list[FKComponent]
    fixed: list[FKFixedAtom]
    truncation: int

    def side_weights(self, side: int):
        """Unnormalized atom weights and locations for one coordinate."""
        jumps = []
        locs = []
        for comp in self.components:
            j = comp.jumps1 if side == 0 else comp.jumps2
            a = comp.atoms1 if side == 0 else comp.atoms2
            keep = j > 0
            jumps.append(j[keep])
            locs.append(a[keep])
        for fa in self.fixed:
            j = fa.jump1 if side == 0 else fa.jump2
            loc = fa.x if side == 0 else fa.y
            jumps.append(np.array([j]))
            locs.append(np.array([loc]))
        return np.concatenate(jumps), np.concatenate(locs)

    def normalized(self, side: int):
        j, a = self.side_weights(side)
        return j / j.sum(), a

    def total_mass(self, side: int) -> float:
        j, _ = self.side_weights(side)
        return float(j.sum())

    def corollary_weights(self, side: int) -> np.ndarray:
        """Group masses (random part, hyper-ties, own-sample-only fixed
        atoms, other-sample-only fixed atoms), normalized to one."""
        rand_mass = sum(float((c.jumps1 if side == 0 else c.jumps2).sum())
                        for c in self.components)
        own = "sample1" if side == 0 else "sample2"
        other = "sample2" if side == 0 else "sample1"
        tied = sum((fa.jump1 if side == 0 else fa.jump2)
                   for fa in self.fixed if fa.kind == "hyper-tie")
        w_own = sum((fa.jump1 if side == 0 else fa.jump2)
                    for fa in self.fixed if fa.kind == own)
        w_other = sum((fa.jump1 if side == 0 else fa.jump2)
                      for fa in self.fixed if fa.kind == other)
        w = np.array([rand_mass, tied, w_own, w_other])
        return w / w.sum()


def _series_component(family: LevyFamily, mass: float, shift: float, m: int, rng):
    """Ordered jumps of one component by tail-integral inversion."""
    if mass <= 0:
        return np.zeros(0), 0.0
    xi = np.cumsum(rng.exponential(size=m))
    jumps = invert_tail_mass(family, xi, shift, mass)
    # expected residual mass below the smallest simulated jump:
    # int_0^{s_min} s e^{-shift s} rho(ds), computed in closed form
    s_min = float(jumps[-1])
    if family is LevyFamily.GAMMA_EQUAL_JUMPS:
        b = 1.0 + shift
        residual = mass * (1.0 - math.exp(-b * s_min)) / b
    else:
        b = 0.5 + shift
        residual = mass * math.sqrt(math.pi / b) * math.erf(math.sqrt(b * s_min)) \
            / math.sqrt(2.0 * math.pi)
    return jumps, max(residual, 0.0)


def _atoms_from_g0(g0: BaseMeasure, n: int, rng):
    """Jointly sampled atom pairs, one row per atom."""
    if n == 0:
        return np.zeros(0), np.zeros(0)
    pairs = np.array([np.atleast_1d(sample_pair(g0, rng))[:2] for _ in range(n)])
    return pairs[:, 0], pairs[:, -1]


@dataclass
class FKContext:
    """Posterior context: tilts plus per-cluster multiplicities and values."""

    u1: float = 0.0
    u2: float = 0.0
    hyper_ties: list[tuple[float, float, int, int]] = field(default_factory=list)
    sample1_only: list[tuple[float, int]] = field(default_factory=list)
    sample2_only: list[tuple[float, int]] = field(default_factory=list)


def ferguson_klass_draw(spec: LevySpec, g0: BaseMeasure, ctx: FKContext,
                        m: int, rng) -> FKDraw:
    """Truncated posterior draw of the measure pair.

    ``m`` bounds the number of simulated jumps per component.  Fixed-atom
    jumps use the gamma-type conditional laws implied by tilting the jump
    intensity with the cluster multiplicities.
    """
    if m < 1:
        raise ValueError("need at least one series jump")
    shift_both = ctx.u1 + ctx.u2
    components: list[FKComponent] = []
    if spec.family in (LevyFamily.GAMMA_EQUAL_JUMPS, LevyFamily.INV_GAUSS_EQUAL_JUMPS):
        jumps, resid = _series_component(spec.family, spec.theta, shift_both, m, rng)
        a1, a2 = _atoms_from_g0(g0, len(jumps), rng)
        components.append(FKComponent(jumps, jumps, a1, a2, resid))
    elif spec.family is LevyFamily.ADDITIVE_GAMMA:
        z = spec.z
        jumps, resid = _series_component(LevyFamily.GAMMA_EQUAL_JUMPS,
                                         (1.0 - z) * spec.theta, shift_both, m, rng)
        a1, a2 = _atoms_from_g0(g0, len(jumps), rng)
        components.append(FKComponent(jumps, jumps, a1, a2, resid))
        j1, r1 = _series_component(LevyFamily.GAMMA_EQUAL_JUMPS, z * spec.theta,
                                   ctx.u1, m, rng)
        a1_only, _ = _atoms_from_g0(g0, len(j1), rng)
        components.append(FKComponent(j1, np.zeros_like(j1), a1_only,
                                      np.full_like(a1_only, np.nan), r1))
        j2, r2 = _series_component(LevyFamily.GAMMA_EQUAL_JUMPS, z * spec.theta,
                                   ctx.u2, m, rng)
        _, a2_only = _atoms_from_g0(g0, len(j2), rng)
        components.append(FKComponent(np.zeros_like(j2), j2,
                                      np.full_like(a2_only, np.nan), a2_only, r2))
    else:
        raise ValueError(f"unsupported family {spec.family}")

    fixed: list[FKFixedAtom] = []
    for x, y, n_i, m_j in ctx.hyper_ties:
        j = _fixed_jump(spec, n_i + m_j, shift_both, rng, common=True)
        fixed.append(FKFixedAtom(x, y, j, j, "hyper-tie"))
    for x, n_i in ctx.sample1_only:
        j1, j2, z_side = _single_side_jump(spec, n_i, ctx.u1, ctx.u2, 0, rng)
        y = z_side if z_side is not None else _companion(g0, 0, x, rng)
        fixed.append(FKFixedAtom(x, y, j1, j2, "sample1"))
    for y, m_j in ctx.sample2_only:
        j1, j2, z_side = _single_side_jump(spec, m_j, ctx.u1, ctx.u2, 1, rng)
        x = z_side if z_side is not None else _companion(g0, 1, y, rng)
        fixed.append(FKFixedAtom(x, y, j2, j1, "sample2"))
    return FKDraw(components, fixed, m)


def _companion(g0: BaseMeasure, side: int, value: float, rng) -> float:
    """Latent companion coordinate from the base-measure conditional."""
    law = conditional(g0, {side: value})
    return float(law.sample(rng)[0])


def _fixed_jump(spec: LevySpec, total: int, shift: float, rng, common: bool) -> float:
    """Jump at a fixed atom: density s^total e^{-shift s} against the
    (shared-component) jump measure, a gamma draw for both families."""
    if spec.family is LevyFamily.INV_GAUSS_EQUAL_JUMPS:
        return rng.gamma(total - 0.5) / (0.5 + shift)
    return rng.gamma(total) / (1.0 + shift)


def _single_side_jump(spec: LevySpec, n: int, u1: float, u2: float, side: int, rng):
    """Jump pair for a cluster seen by one sample only.

    Equal-jumps families put the same jump on both coordinates.  The
    additive family mixes its idiosyncratic component (other coordinate
    gets a zero jump; no companion atom exists) with the shared component
    (same jump on both; companion atom drawn from the conditional),
    with posterior mixture weights proportional to the tilted moments.
    Returns (own_jump, other_jump, None) -- the None signals the caller to
    draw a companion only when the shared component was selected.
    """
    if spec.family in (LevyFamily.GAMMA_EQUAL_JUMPS, LevyFamily.INV_GAUSS_EQUAL_JUMPS):
        j = _fixed_jump(spec, n, u1 + u2, rng, common=True)
        return j, j, None
    z = spec.z
    u_own = u1 if side == 0 else u2
    log_idio = math.log(z) if z > 0 else -math.inf
    log_idio += math.lgamma(n) - n * math.log1p(u_own)
    log_comm = math.log1p(-z) if z < 1 else -math.inf
    log_comm += math.lgamma(n) - n * math.log1p(u1 + u2)
    hi = max(log_idio, log_comm)
    p_idio = math.exp(log_idio - hi) / (math.exp(log_idio - hi) + math.exp(log_comm - hi))
    if rng.random() < p_idio:
        j = rng.gamma(n) / (1.0 + u_own)
        return j, 0.0, math.nan
    j = rng.gamma(n) / (1.0 + u1 + u2)
    return j, j, None
