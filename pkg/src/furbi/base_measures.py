"""Atom distributions on product spaces: sampling, conditionals, densities.

A base measure couples the atoms seen by the different samples.  The
families below cover independent-to-comonotone bivariate Gaussian coupling,
its G-variate extension, the fully shared-atom (diagonal) limit, the
normal-inverse-gamma pair used for location-scale mixtures, and the
degenerate coupling used for missing-data clustering where coordinates of
the same original variable must agree across samples.

Densities of the degenerate families are taken with respect to Lebesgue
measure on the support (one value per underlying variable); they only ever
enter posterior computations through ratios over a fixed structure, so the
choice of reference measure is immaterial as long as it is used
consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaln, ndtr

_LOG_2PI = math.log(2.0 * math.pi)


class G0Family(Enum):
    BIVARIATE_GAUSSIAN = "bivariate-gaussian"
    MULTIVARIATE_GAUSSIAN_CORR = "multivariate-gaussian-corr"
    DIAGONAL_DEGENERATE = "diagonal-degenerate"
    NORMAL_INVGAMMA_PAIR = "normal-invgamma-pair"
    MISSING_DATA_DEGENERATE = "missing-data-degenerate"


@dataclass(frozen=True)
class NIGParams:
    """Hyperparameters of the paired normal-inverse-gamma base."""

    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha1: float = 2.0
    beta1: float = 4.0
    alpha2: float = 2.0
    beta2: float = 4.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "alpha1", "beta1", "alpha2", "beta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class ConditionalKind(Enum):
    GAUSSIAN = "gaussian"
    DIRAC = "dirac"
    GAUSSIAN_SUBSET = "gaussian-given-subset"


@dataclass
class ConditionalLaw:
    """Law of the unobserved coordinates given the observed ones."""

    kind: ConditionalKind
    mean: np.ndarray
    cov: np.ndarray | None = None  # None for Dirac
    indices: tuple[int, ...] = ()

    def sample(self, rng) -> np.ndarray:
        if self.kind is ConditionalKind.DIRAC:
            return np.array(self.mean, copy=True)
        if self.mean.size == 1:
            return np.array([self.mean[0] + math.sqrt(float(self.cov[0, 0])) * rng.standard_normal()])
        return rng.multivariate_normal(self.mean, self.cov)

    def logpdf(self, value: np.ndarray) -> float:
        if self.kind is ConditionalKind.DIRAC:
            return 0.0 if np.allclose(value, self.mean) else -math.inf
        return mvn_logpdf(np.asarray(value, dtype=float), self.mean, self.cov)


def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    d = x - mean
    if d.size == 1:
        v = float(cov.reshape(())) if cov.ndim == 0 else float(cov[0, 0])
        return -0.5 * (_LOG_2PI + math.log(v) + d[0] * d[0] / v)
    chol = np.linalg.cholesky(cov)
    w = np.linalg.solve(chol, d)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (len(x) * _LOG_2PI + logdet + float(w @ w))


@dataclass(frozen=True)
class BaseMeasure:
    """An atom distribution with common marginal law across samples.

    ``mean`` and ``scale`` describe the underlying variables (one per
    coordinate of the latent space); ``corr`` is their correlation matrix.
    For the degenerate families the latent space is lower-dimensional than
    the product of the sample spaces and all samples read their atoms off
    the same latent vector.
    """

    family: G0Family
    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: np.ndarray = field(default_factory=lambda: np.ones(2))
    corr: np.ndarray | None = None
    nig: NIGParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "scale", np.atleast_1d(np.asarray(self.scale, dtype=float)))
        if np.any(self.scale <= 0):
            raise ValueError("scales must be positive")
        if self.corr is not None:
            c = np.asarray(self.corr, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise ValueError("corr must be square")
            if not np.allclose(c, c.T) or not np.allclose(np.diag(c), 1.0):
                raise ValueError("corr must be symmetric with unit diagonal")
            object.__setattr__(self, "corr", c)
        if self.family is G0Family.NORMAL_INVGAMMA_PAIR and self.nig is None:
            object.__setattr__(self, "nig", NIGParams())

    # -- constructors -------------------------------------------------------

    @staticmethod
    def bivariate_gaussian(rho0: float, mean=(0.0, 0.0), scale=(1.0, 1.0)) -> "BaseMeasure":
        if not (-1.0 <= rho0 <= 1.0):
            raise ValueError("rho0 must lie in [-1, 1]")
        corr = np.array([[1.0, rho0], [rho0, 1.0]])
        return BaseMeasure(G0Family.BIVARIATE_GAUSSIAN, np.asarray(mean), np.asarray(scale), corr)

    @staticmethod
    def multivariate_gaussian(corr: np.ndarray, mean=None, scale=None) -> "BaseMeasure":
        corr = np.asarray(corr, dtype=float)
        dim = corr.shape[0]
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
        scale = np.ones(dim) if scale is None else np.asarray(scale, dtype=float)
        return BaseMeasure(G0Family.MULTIVARIATE_GAUSSIAN_CORR, mean, scale, corr)

    @staticmethod
    def diagonal_degenerate(mean=0.0, scale=1.0) -> "BaseMeasure":
        return BaseMeasure(G0Family.DIAGONAL_DEGENERATE, np.array([mean]), np.array([scale]))

    @staticmethod
    def normal_invgamma_pair(rho0: float, mean=(0.0, 0.0), nig: NIGParams | None = None) -> "BaseMeasure":
        corr = np.array([[1.0, rho0], [rho0, 1.0]])
        return BaseMeasure(G0Family.NORMAL_INVGAMMA_PAIR, np.asarray(mean), np.ones(2), corr,
                           nig or NIGParams())

    @staticmethod
    def missing_data_degenerate(corr: np.ndarray, mean=None, scale=None) -> "BaseMeasure":
        corr = np.asarray(corr, dtype=float)
        dim = corr.shape[0]
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
        scale = np.ones(dim) if scale is None else np.asarray(scale, dtype=float)
        return BaseMeasure(G0Family.MISSING_DATA_DEGENERATE, mean, scale, corr)

    # -- derived quantities -------------------------------------------------

    @property
    def rho0(self) -> float:
        """Correlation of the two coordinates of one atom pair."""
        if self.family is G0Family.DIAGONAL_DEGENERATE:
            return 1.0
        if self.family in (G0Family.BIVARIATE_GAUSSIAN, G0Family.NORMAL_INVGAMMA_PAIR):
            return float(self.corr[0, 1])
        raise ValueError("rho0 is a pairwise notion; use corr for G-variate families")

    @property
    def latent_dim(self) -> int:
        if self.family is G0Family.DIAGONAL_DEGENERATE:
            return 1
        return len(self.mean)

    def cov(self) -> np.ndarray:
        """Covariance of the latent Gaussian variables."""
        if self.family is G0Family.DIAGONAL_DEGENERATE:
            return np.array([[float(self.scale[0]) ** 2]])
        d = np.diag(self.scale)
        return d @ self.corr @ d

    def with_corr(self, corr: np.ndarray) -> "BaseMeasure":
        return BaseMeasure(self.family, self.mean, self.scale, np.asarray(corr, dtype=float), self.nig)

    def with_rho0(self, rho0: float) -> "BaseMeasure":
        return self.with_corr(np.array([[1.0, rho0], [rho0, 1.0]]))


# ---------------------------------------------------------------------------
# operations


def sample_pair(g0: BaseMeasure, rng):
    """One atom draw from the joint base measure.

    Gaussian families return the latent vector (one value per underlying
    variable; degenerate families share values by construction).  The
    normal-inverse-gamma pair returns ((x, s2_1), (y, s2_2)).
    """
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        x = float(g0.mean[0] + g0.scale[0] * rng.standard_normal())
        return np.array([x, x])
    if g0.family is G0Family.NORMAL_INVGAMMA_PAIR:
        p = g0.nig
        s2w = p.beta1 / rng.gamma(p.alpha1)
        s2v = p.beta2 / rng.gamma(p.alpha2)
        rho = g0.rho0
        sw = math.sqrt(s2w / p.lambda1)
        sv = math.sqrt(s2v / p.lambda2)
        e1 = rng.standard_normal()
        e2 = rho * e1 + math.sqrt(max(0.0, 1.0 - rho * rho)) * rng.standard_normal()
        x = float(g0.mean[0] + sw * e1)
        y = float(g0.mean[1] + sv * e2)
        return (x, s2w), (y, s2v)
    chol = np.linalg.cholesky(g0.cov())
    return g0.mean + chol @ rng.standard_normal(g0.latent_dim)


def conditional(g0: BaseMeasure, observed: dict[int, float]) -> ConditionalLaw:
    """Exact law of the unobserved coordinates given observed ones.

    ``observed`` maps latent-coordinate index to value.  For the
    normal-inverse-gamma pair the key is the side (0 or 1) and the value is
    the (location, squared-scale) tuple of that side; the conditional is
    returned for the location given fixed squared scales, the companion
    squared scale being independent of the conditioning side.
    """
    if not observed:
        raise ValueError("conditioning set must be non-empty")
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        (idx, val), = observed.items()
        return ConditionalLaw(ConditionalKind.DIRAC, np.array([val]), None, (1 - idx,))
    if g0.family is G0Family.NORMAL_INVGAMMA_PAIR:
        raise ValueError("use nig_conditional for the normal-inverse-gamma pair")
    dim = g0.latent_dim
    obs_idx = sorted(observed)
    if len(obs_idx) >= dim:
        raise ValueError("cannot condition on all coordinates")
    rest = tuple(i for i in range(dim) if i not in observed)
    cov = g0.cov()
    a = np.array(obs_idx)
    b = np.array(rest)
    cov_oo = cov[np.ix_(a, a)]
    cov_ro = cov[np.ix_(b, a)]
    dev = np.array([observed[i] - g0.mean[i] for i in obs_idx])
    w = np.linalg.solve(cov_oo, dev)
    mean = g0.mean[b] + cov_ro @ w
    cond_cov = cov[np.ix_(b, b)] - cov_ro @ np.linalg.solve(cov_oo, cov_ro.T)
    kind = ConditionalKind.GAUSSIAN if len(rest) == 1 else ConditionalKind.GAUSSIAN_SUBSET
    return ConditionalLaw(kind, mean, np.atleast_2d(cond_cov), rest)


def nig_conditional(g0: BaseMeasure, side: int, loc: float, s2_obs: float,
                    s2_other: float) -> ConditionalLaw:
    """Conditional location law of the other side given one side's (loc, s2).

    The companion squared scale is independent of the conditioning side and
    keeps its inverse-gamma prior; this returns the Gaussian conditional of
    the other location at fixed squared scales.
    """
    p = g0.nig
    rho = g0.rho0
    if side == 0:
        lam_o, lam_r = p.lambda1, p.lambda2
        m_o, m_r = g0.mean[0], g0.mean[1]
    else:
        lam_o, lam_r = p.lambda2, p.lambda1
        m_o, m_r = g0.mean[1], g0.mean[0]
    s_o = math.sqrt(s2_obs / lam_o)
    s_r = math.sqrt(s2_other / lam_r)
    mean = m_r + rho * (s_r / s_o) * (loc - m_o)
    var = (1.0 - rho * rho) * s2_other / lam_r
    return ConditionalLaw(ConditionalKind.GAUSSIAN, np.array([mean]),
                          np.array([[var]]), (1 - side,))


def p0_density(g0: BaseMeasure, point) -> float:
    """Density of the common marginal at a point."""
    if g0.family is G0Family.NORMAL_INVGAMMA_PAIR:
        x, s2 = point
        p = g0.nig
        log_ig = (p.alpha1 * math.log(p.beta1) - float(gammaln(p.alpha1))
                  - (p.alpha1 + 1.0) * math.log(s2) - p.beta1 / s2)
        var = s2 / p.lambda1
        log_n = -0.5 * (_LOG_2PI + math.log(var) + (x - g0.mean[0]) ** 2 / var)
        return math.exp(log_ig + log_n)
    mu = float(g0.mean[0])
    sd = float(g0.scale[0])
    z = (float(point) - mu) / sd
    return math.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))


def g0_density(g0: BaseMeasure, pair) -> float:
    """Joint density of an atom pair (or latent vector) under the base measure."""
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        x, y = pair
        if x != y:
            return 0.0
        return p0_density(g0, x)
    if g0.family is G0Family.NORMAL_INVGAMMA_PAIR:
        (x, s2w), (y, s2v) = pair
        p = g0.nig
        rho = g0.rho0
        v1 = s2w / p.lambda1
        v2 = s2v / p.lambda2
        cov = np.array([[v1, rho * math.sqrt(v1 * v2)], [rho * math.sqrt(v1 * v2), v2]])
        log_n2 = mvn_logpdf(np.array([x, y]), g0.mean, cov)
        log_ig1 = (p.alpha1 * math.log(p.beta1) - float(gammaln(p.alpha1))
                   - (p.alpha1 + 1.0) * math.log(s2w) - p.beta1 / s2w)
        log_ig2 = (p.alpha2 * math.log(p.beta2) - float(gammaln(p.alpha2))
                   - (p.alpha2 + 1.0) * math.log(s2v) - p.beta2 / s2v)
        return math.exp(log_n2 + log_ig1 + log_ig2)
    vec = np.atleast_1d(np.asarray(pair, dtype=float))
    if g0.family is G0Family.MISSING_DATA_DEGENERATE and len(vec) != g0.latent_dim:
        raise ValueError("degenerate base density takes one value per underlying variable")
    return math.exp(mvn_logpdf(vec, g0.mean, g0.cov()))


def p0_cdf(g0: BaseMeasure, x: float) -> float:
    return float(ndtr((x - float(g0.mean[0])) / float(g0.scale[0])))


def build_corr_matrix(rhos, dim: int) -> np.ndarray | None:
    """Assemble a correlation matrix from pairwise entries; None if not PD.

    Entries are ordered lexicographically over pairs (i, j) with i < j.
    Rejection (returning None) is the intended signal for hyperprior
    truncation to the positive-definite region, not an error.
    """
    rhos = np.asarray(rhos, dtype=float)
    n_pairs = dim * (dim - 1) // 2
    if rhos.size != n_pairs:
        raise ValueError(f"need {n_pairs} pairwise correlations for dim {dim}")
    if np.any(np.abs(rhos) > 1.0):
        raise ValueError("pairwise correlations must lie in [-1, 1]")
    mat = np.eye(dim)
    k = 0
    for i in range(dim):
        for j in range(i + 1, dim):
            mat[i, j] = mat[j, i] = rhos[k]
            k += 1
    if np.min(np.linalg.eigvalsh(mat)) <= 1e-12:
        return None
    return mat


def sample_corr_matrix(dim: int, rng, max_tries: int = 10000) -> np.ndarray:
    """Rejection-sample a PD correlation matrix from the uniform box."""
    for _ in range(max_tries):
        mat = build_corr_matrix(rng.uniform(-1.0, 1.0, size=dim * (dim - 1) // 2), dim)
        if mat is not None:
            return mat
    raise RuntimeError("could not sample a positive-definite correlation matrix")
