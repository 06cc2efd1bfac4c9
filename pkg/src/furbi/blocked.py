"""Truncated stick-breaking conditional sampler for equal-jumps mixtures.

With equal jumps and a Dirichlet-process marginal, the product-space
measure is a single Dirichlet process whose atoms are jointly sampled
vectors; all sample groups share the weights and read different
coordinates of the atoms.  The sampler truncates the stick-breaking
series at N components (last stick set to one) and cycles conjugate
updates: allocations, sticks, joint-Gaussian atoms, then the
concentration and atom-correlation hyperparameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base_measures import BaseMeasure, G0Family, mvn_logpdf
from .samplers import GammaPrior, HyperPriors, _reflect


@dataclass
class BlockedState:
    weights: np.ndarray          # (N,)
    sticks: np.ndarray           # (N,), last entry 1
    atoms: np.ndarray            # (N, V)
    labels: list[np.ndarray]
    theta: float


class BlockedChain:
    """Blocked Gibbs sampler over a truncated shared-weight representation."""

    def __init__(self, g0: BaseMeasure, data: list[np.ndarray], theta: float,
                 kernel_sigma2: float, truncation: int,
                 priors: HyperPriors | None = None, rng=None,
                 obs_coords: list[int] | None = None):
        if truncation < 1:
            raise ValueError("truncation must be at least 1")
        self.g0 = g0
        self.data = [np.asarray(d, dtype=float).ravel() for d in data]
        self.n_groups = len(self.data)
        self.theta = float(theta)
        self.sigma2 = float(kernel_sigma2)
        self.trunc = int(truncation)
        self.priors = priors or HyperPriors()
        self.rng = rng or np.random.default_rng()
        self.obs_coords = obs_coords if obs_coords is not None else list(range(self.n_groups))
        self.cov0 = g0.cov()
        self.mean0 = g0.mean.copy()
        self.v_dim = self.cov0.shape[0]
        self.atoms = self._prior_atoms(self.trunc)
        self.sticks = np.append(self.rng.beta(1.0, self.theta, size=self.trunc - 1), 1.0)
        self.weights = self._stick_weights(self.sticks)
        self.labels = [np.zeros(len(d), dtype=int) for d in self.data]

    # -- pieces ----------------------------------------------------------------

    def _prior_atoms(self, n: int) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov0)
        return self.mean0 + self.rng.standard_normal((n, self.v_dim)) @ chol.T

    @staticmethod
    def _stick_weights(sticks: np.ndarray) -> np.ndarray:
        w = sticks.copy()
        w[1:] *= np.cumprod(1.0 - sticks[:-1])
        return w

    def _allocate(self):
        logw = np.log(np.maximum(self.weights, 1e-300))
        for g in range(self.n_groups):
            if len(self.data[g]) == 0:
                continue
            mu = self.atoms[:, self.obs_coords[g]]
            ll = -0.5 * (self.data[g][:, None] - mu[None, :]) ** 2 / self.sigma2
            lp = ll + logw[None, :]
            lp -= lp.max(axis=1, keepdims=True)
            p = np.exp(lp)
            p /= p.sum(axis=1, keepdims=True)
            u = self.rng.random((len(self.data[g]), 1))
            self.labels[g] = np.minimum(
                (u > np.cumsum(p, axis=1)[:, :-1]).sum(axis=1), self.trunc - 1)

    def _counts(self) -> np.ndarray:
        counts = np.zeros(self.trunc, dtype=int)
        for g in range(self.n_groups):
            if len(self.labels[g]):
                counts += np.bincount(self.labels[g], minlength=self.trunc)
        return counts

    def _update_sticks(self, counts: np.ndarray):
        tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]])
        a = 1.0 + counts[:-1]
        b = self.theta + tail[:-1]
        self.sticks = np.append(self.rng.beta(a, b), 1.0)
        self.weights = self._stick_weights(self.sticks)

    def _update_atoms(self):
        prec0 = np.linalg.inv(self.cov0)
        rhs0 = prec0 @ self.mean0
        counts_v = np.zeros((self.trunc, self.v_dim))
        sums_v = np.zeros((self.trunc, self.v_dim))
        for g in range(self.n_groups):
            coord = self.obs_coords[g]
            if len(self.data[g]) == 0:
                continue
            counts_v[:, coord] += np.bincount(self.labels[g], minlength=self.trunc)
            sums_v[:, coord] += np.bincount(self.labels[g], weights=self.data[g],
                                            minlength=self.trunc)
        for k in range(self.trunc):
            if counts_v[k].sum() == 0:
                self.atoms[k] = self.mean0 + np.linalg.cholesky(self.cov0) @ \
                    self.rng.standard_normal(self.v_dim)
                continue
            prec = prec0 + np.diag(counts_v[k] / self.sigma2)
            cov = np.linalg.inv(prec)
            mean = cov @ (rhs0 + sums_v[k] / self.sigma2)
            self.atoms[k] = mean + np.linalg.cholesky(cov) @ self.rng.standard_normal(self.v_dim)

    def _update_theta(self):
        pr = self.priors.theta
        if pr is None:
            return
        # sticks are iid Beta(1, theta): conjugate gamma update
        log1m = np.log(np.maximum(1.0 - self.sticks[:-1], 1e-300))
        self.theta = self.rng.gamma(pr.shape + self.trunc - 1) / (pr.rate - float(np.sum(log1m)))

    def _update_corr(self, step: float = 0.15):
        if self.priors.rho0 is None and self.priors.corr is None:
            return
        corr = self.g0.corr
        dim = corr.shape[0]
        if dim == 2:
            prop_r = _reflect(float(corr[0, 1]) + step * self.rng.standard_normal(), -1.0, 1.0)
            prop = np.array([[1.0, prop_r], [prop_r, 1.0]])
        else:
            iu = np.triu_indices(dim, 1)
            prop_rhos = np.array([_reflect(r + step * self.rng.standard_normal(), -1.0, 1.0)
                                  for r in corr[iu]])
            prop = np.eye(dim)
            prop[iu] = prop_rhos
            prop = prop + prop.T - np.eye(dim)
            if np.min(np.linalg.eigvalsh(prop)) <= 1e-10:
                return
        d = np.diag(self.g0.scale)
        cov_cur = self.cov0
        cov_prop = d @ prop @ d
        cur = sum(mvn_logpdf(a, self.mean0, cov_cur) for a in self.atoms)
        new = sum(mvn_logpdf(a, self.mean0, cov_prop) for a in self.atoms)
        if math.log(self.rng.random() + 1e-300) < new - cur:
            self.g0 = self.g0.with_corr(prop)
            self.cov0 = cov_prop

    # -- public ------------------------------------------------------------------

    def sweep(self):
        self._allocate()
        counts = self._counts()
        self._update_sticks(counts)
        self._update_atoms()
        self._update_theta()
        self._update_corr()

    def density_on_grid(self, grid: np.ndarray, g: int) -> np.ndarray:
        mu = self.atoms[:, self.obs_coords[g]]
        kern = np.exp(-0.5 * (grid[:, None] - mu[None, :]) ** 2 / self.sigma2) \
            / math.sqrt(2.0 * math.pi * self.sigma2)
        return kern @ self.weights

    def point_densities(self, g: int) -> np.ndarray:
        return self.density_on_grid(self.data[g], g)

    def flat_labels(self) -> np.ndarray:
        return np.concatenate(self.labels) if self.n_groups else np.zeros(0, int)

    def n_occupied(self) -> int:
        return int(np.sum(self._counts() > 0))

    @property
    def corr_param(self) -> np.ndarray:
        return self.g0.corr


def blocked_gibbs_equal_jumps(chain: BlockedChain) -> BlockedChain:
    """One sweep of the truncated conditional sampler."""
    chain.sweep()
    return chain


def make_blocked_chain(g0: BaseMeasure, data_x, data_y, theta: float = 1.0,
                       kernel_sigma2: float = 1.0, truncation: int = 20,
                       priors: HyperPriors | None = None, rng=None) -> BlockedChain:
    """Two-sample constructor; the diagonal family shares the atom coordinate."""
    if g0.family is G0Family.DIAGONAL_DEGENERATE:
        coords = [0, 0]
    else:
        coords = [0, 1]
    return BlockedChain(g0, [np.asarray(data_x, float), np.asarray(data_y, float)],
                        theta, kernel_sigma2, truncation, priors, rng, coords)
