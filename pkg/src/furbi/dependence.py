"""Dependence calculators: tie and hyper-tie probabilities and correlations.

The probability of a tie (two observations in one sample coinciding) and of
a hyper-tie (observations in different samples drawn from the same atom
pair) fully determine the second-order dependence structure:

* within-sample correlation of observables equals the tie probability;
* across-sample correlation equals the hyper-tie probability times the
  correlation of one atom pair under the base measure;
* correlations of the random measures on sets follow the covariance
  identity implemented in :func:`corr_measures`.

Closed forms are available for the gamma families; the inverse-Gaussian
family goes through one- and two-dimensional quadrature of the
Laplace-exponent integrals

    beta  = - int u psi''(u) e^{-psi(u)} du,
    gamma = - int d2 psi_b / du1 du2 e^{-psi_b(u1,u2)} du1 du2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr

from .base_measures import BaseMeasure, G0Family, p0_cdf
from .levy import LevyFamily, LevySpec, d2_psi_b, psi, psi_dd
from .quadrature import QuadratureConfig, integrate_halfline, integrate_posneg_2d
from .special import bvn_rectangle, hyp3f2_unit


class Method(Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte-carlo"


@dataclass
class DependenceReport:
    beta: float
    gamma: float
    rho0: float
    corr_within: float
    corr_across: float
    method: Method
    mc_stderr: dict[str, float] | None = None

    def to_dict(self) -> dict:
        out = {
            "beta": self.beta,
            "gamma": self.gamma,
            "rho0": self.rho0,
            "corr_within": self.corr_within,
            "corr_across": self.corr_across,
            "method": self.method.value,
        }
        if self.mc_stderr is not None:
            out["mc_stderr"] = dict(self.mc_stderr)
        return out


def beta_closed(spec: LevySpec) -> float:
    """Tie probability; closed form for gamma families, quadrature otherwise."""
    if spec.family in (LevyFamily.GAMMA_EQUAL_JUMPS, LevyFamily.ADDITIVE_GAMMA):
        return 1.0 / (1.0 + spec.theta)
    return integrate_halfline(
        lambda u: -u * psi_dd(spec, u) * math.exp(-psi(spec, u)),
        QuadratureConfig(rel_tol=1e-10, abs_tol=1e-13),
    )


def gamma_closed(spec: LevySpec) -> float:
    """Hyper-tie probability in closed form.

    Equal-jumps families share their weights across samples, so the
    hyper-tie probability equals the tie probability.  The additive gamma
    family has

        gamma = (1-z) * 3F2(theta - theta z + 2, 1, 1; theta+2, theta+2; 1)
                * theta / (1+theta)^2.
    """
    if spec.equal_jumps:
        return beta_closed(spec)
    th, z = spec.theta, spec.z
    if z >= 1.0:
        return 0.0
    f = hyp3f2_unit(th - th * z + 2.0, 1.0, 1.0, th + 2.0, th + 2.0)
    return (1.0 - z) * f * th / (1.0 + th) ** 2


def gamma_numeric(spec: LevySpec, cfg: QuadratureConfig | None = None) -> float:
    """Hyper-tie probability by quadrature of the joint-exponent integral."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-9, abs_tol=1e-13)

    def integrand(u1, u2):
        return -d2_psi_b(spec, u1, u2) * math.exp(-spec.theta * _psi_b_unit(spec, u1, u2))

    return integrate_posneg_2d(integrand, cfg)


def _psi_b_unit(spec: LevySpec, u1: float, u2: float) -> float:
    s = u1 + u2
    if spec.family is LevyFamily.GAMMA_EQUAL_JUMPS:
        return math.log1p(s)
    if spec.family is LevyFamily.INV_GAUSS_EQUAL_JUMPS:
        return math.sqrt(1.0 + 2.0 * s) - 1.0
    z = spec.z
    return z * (math.log1p(u1) + math.log1p(u2)) + (1.0 - z) * math.log1p(s)


def atom_correlation(g0: BaseMeasure) -> float:
    """Correlation of one atom pair under the base measure, analytically."""
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        return 1.0
    if g0.family is G0Family.BIVARIATE_GAUSSIAN:
        return g0.rho0
    if g0.family is G0Family.NORMAL_INVGAMMA_PAIR:
        # locations are scale mixtures: corr = rho0 E[s_w] E[s_v] / sqrt(E[s2_w] E[s2_v]),
        # with s_w, s_v the independent inverse-gamma scales
        p = g0.nig
        if p.alpha1 <= 1.0 or p.alpha2 <= 1.0:
            raise ValueError("atom correlation needs finite second moments (alpha > 1)")
        e_sw = math.sqrt(p.beta1) * math.exp(_lgamma(p.alpha1 - 0.5) - _lgamma(p.alpha1))
        e_sv = math.sqrt(p.beta2) * math.exp(_lgamma(p.alpha2 - 0.5) - _lgamma(p.alpha2))
        e_s2w = p.beta1 / (p.alpha1 - 1.0)
        e_s2v = p.beta2 / (p.alpha2 - 1.0)
        return g0.rho0 * e_sw * e_sv / math.sqrt(e_s2w * e_s2v)
    raise ValueError("atom correlation is a pairwise notion; unsupported family")


def _lgamma(x: float) -> float:
    return math.lgamma(x)


def corr_observables(spec: LevySpec, g0: BaseMeasure) -> tuple[float, float]:
    """(within-sample, across-sample) correlation of the observables."""
    beta = beta_closed(spec)
    gamma = gamma_closed(spec)
    return beta, gamma * atom_correlation(g0)


def corr_measures(spec: LevySpec, g0: BaseMeasure,
                  set_a: tuple[float, float], set_b: tuple[float, float]) -> float:
    """Correlation of the two random probabilities on intervals A and B.

        corr = (gamma/beta) * [G0(A x B) - P0(A) P0(B)]
               / sqrt(P0(A)(1-P0(A)) P0(B)(1-P0(B)))
    """
    if g0.family not in (G0Family.BIVARIATE_GAUSSIAN, G0Family.DIAGONAL_DEGENERATE):
        raise ValueError("measure correlation implemented for Gaussian atom pairs")
    a_lo, a_hi = set_a
    b_lo, b_hi = set_b
    p_a = p0_cdf(g0, a_hi) - p0_cdf(g0, a_lo)
    p_b = p0_cdf(g0, b_hi) - p0_cdf(g0, b_lo)
    if not (0.0 < p_a < 1.0 and 0.0 < p_b < 1.0):
        raise ValueError("sets must have marginal probability strictly in (0, 1)")
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        lo = max(a_lo, b_lo)
        hi = min(a_hi, b_hi)
        g_ab = max(0.0, p0_cdf(g0, hi) - p0_cdf(g0, lo)) if hi > lo else 0.0
    else:
        m1, m2 = float(g0.mean[0]), float(g0.mean[1])
        s1, s2 = float(g0.scale[0]), float(g0.scale[1])
        g_ab = bvn_rectangle((a_lo - m1) / s1, (a_hi - m1) / s1,
                             (b_lo - m2) / s2, (b_hi - m2) / s2, g0.rho0)
    beta = beta_closed(spec)
    gamma = gamma_closed(spec)
    return (gamma / beta) * (g_ab - p_a * p_b) / math.sqrt(
        p_a * (1.0 - p_a) * p_b * (1.0 - p_b))


def hdp_dependence(theta: float, theta0: float) -> tuple[float, float]:
    """Tie and hyper-tie probabilities of the hierarchical Dirichlet process.

    Calculator only; the hierarchical sampler itself is out of scope.
    """
    if theta <= 0 or theta0 <= 0:
        raise ValueError("concentrations must be positive")
    beta = 1.0 - theta * theta0 / ((1.0 + theta) * (1.0 + theta0))
    gamma = 1.0 / (1.0 + theta0)
    return beta, gamma


# ---------------------------------------------------------------------------
# Monte Carlo oracle


def _stick_atoms(theta: float, n_reps: int, n_atoms: int, rng) -> np.ndarray:
    """Stick-breaking weights, one row per replicate."""
    v = rng.beta(1.0, theta, size=(n_reps, n_atoms))
    stick = np.cumprod(1.0 - v, axis=1)
    w = v.copy()
    w[:, 1:] *= stick[:, :-1]
    # normalize the truncation remainder into the last atom
    w[:, -1] += stick[:, -1]
    return w


def _categorical_rows(w: np.ndarray, rng) -> np.ndarray:
    cum = np.cumsum(w, axis=1)
    u = rng.random((w.shape[0], 1))
    return (u > cum[:, :-1]).sum(axis=1)


def n_atoms_for_residual(theta: float, tol: float = 1e-6) -> int:
    """Smallest truncation with expected residual stick mass below tol."""
    return max(8, int(math.ceil(math.log(tol) / math.log(theta / (1.0 + theta)))))


def mc_dependence_oracle(spec: LevySpec, g0: BaseMeasure, n_atoms: int,
                         n_reps: int, rng) -> DependenceReport:
    """Simulation estimate of tie/hyper-tie probabilities and correlations.

    Works at the level of the product-space series representation:
    weights are simulated by stick-breaking (gamma marginals) and the
    additive family by its three-component decomposition; observables are
    read off jointly sampled Gaussian atoms.
    """
    if g0.family not in (G0Family.BIVARIATE_GAUSSIAN, G0Family.DIAGONAL_DEGENERATE):
        raise ValueError("oracle implemented for Gaussian atom pairs")
    th = spec.theta
    rho0 = 1.0 if g0.family is G0Family.DIAGONAL_DEGENERATE else g0.rho0

    if spec.family is LevyFamily.GAMMA_EQUAL_JUMPS:
        w = _stick_atoms(th, n_reps, n_atoms, rng)
        i_x1 = _categorical_rows(w, rng)
        i_x2 = _categorical_rows(w, rng)
        i_y = _categorical_rows(w, rng)
        tie = i_x1 == i_x2
        hyper = i_x1 == i_y
    elif spec.family is LevyFamily.ADDITIVE_GAMMA:
        z = spec.z
        # total masses of the shared and idiosyncratic components
        t_c = rng.gamma(max((1.0 - z) * th, 1e-300), size=n_reps)
        t_i1 = rng.gamma(max(z * th, 1e-300), size=n_reps) if z > 0 else np.zeros(n_reps)
        t_i2 = rng.gamma(max(z * th, 1e-300), size=n_reps) if z > 0 else np.zeros(n_reps)
        if z >= 1.0:
            t_c = np.zeros(n_reps)
        w_c = _stick_atoms(max((1.0 - z) * th, 1e-12), n_reps, n_atoms, rng)
        pc1 = t_c / np.maximum(t_c + t_i1, 1e-300)
        pc2 = t_c / np.maximum(t_c + t_i2, 1e-300)
        in_c_x1 = rng.random(n_reps) < pc1
        in_c_x2 = rng.random(n_reps) < pc1
        in_c_y = rng.random(n_reps) < pc2
        i_x1 = _categorical_rows(w_c, rng)
        i_x2 = _categorical_rows(w_c, rng)
        i_y = _categorical_rows(w_c, rng)
        # idiosyncratic picks never coincide across samples; within one
        # sample they tie only through the idiosyncratic weights,
        # simulated with their own sticks
        w_i1 = _stick_atoms(max(z * th, 1e-12), n_reps, n_atoms, rng)
        j_x1 = _categorical_rows(w_i1, rng)
        j_x2 = _categorical_rows(w_i1, rng)
        tie = np.where(in_c_x1 & in_c_x2, i_x1 == i_x2,
                       (~in_c_x1) & (~in_c_x2) & (j_x1 == j_x2))
        hyper = in_c_x1 & in_c_y & (i_x1 == i_y)
    else:
        raise ValueError("oracle implemented for Dirichlet-marginal families")

    # observables: common-component atoms are drawn jointly, idiosyncratic
    # atoms independently from the marginal
    eps1 = rng.standard_normal(n_reps)
    eps2 = rho0 * eps1 + math.sqrt(max(0.0, 1.0 - rho0 * rho0)) * rng.standard_normal(n_reps)
    if spec.family is LevyFamily.ADDITIVE_GAMMA:
        x_obs = np.where(in_c_x1, eps1, rng.standard_normal(n_reps))
        shared = in_c_x1 & in_c_y & (i_x1 == i_y)
        y_same = eps2
        y_indep = rng.standard_normal(n_reps)
        y_obs = np.where(shared, y_same, np.where(in_c_y, _fresh_pair(rho0, n_reps, rng), y_indep))
    else:
        x_obs = eps1
        shared = hyper
        y_obs = np.where(shared, eps2, _fresh_pair(rho0, n_reps, rng))

    beta_hat = float(np.mean(tie))
    gamma_hat = float(np.mean(hyper))
    corr_hat = float(np.corrcoef(x_obs, y_obs)[0, 1])
    se = {
        "beta": float(np.std(tie) / math.sqrt(n_reps)),
        "gamma": float(np.std(hyper) / math.sqrt(n_reps)),
        "corr": 1.0 / math.sqrt(n_reps),
    }
    return DependenceReport(beta_hat, gamma_hat, rho0, beta_hat,
                            corr_hat, Method.MONTE_CARLO, se)


def _fresh_pair(rho0: float, n: int, rng) -> np.ndarray:
    """Second coordinate of an independent atom pair (marginal draw)."""
    return rng.standard_normal(n)
