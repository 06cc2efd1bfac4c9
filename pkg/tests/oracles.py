"""Shared simulation oracles for the sampler and acceptance tests."""

import numpy as np

from furbi.base_measures import BaseMeasure
from furbi.levy import LevyFamily, LevySpec, sample_u_exact_gamma
from furbi.samplers import HyperPriors, make_two_sample_chain


def crp_partition(n_items: int, theta: float, rng) -> np.ndarray:
    """Sequential seating with weights n_k : theta."""
    labels = np.zeros(n_items, dtype=int)
    next_lab = 1
    for i in range(1, n_items):
        counts = np.bincount(labels[:i]).astype(float)
        probs = np.append(counts, theta)
        probs /= probs.sum()
        pick = int(rng.choice(len(probs), p=probs))
        labels[i] = pick if pick < next_lab else next_lab
        next_lab = max(next_lab, labels[i] + 1)
    return labels


def forward_gamma_mixture(n: int, m: int, theta: float, rho: float, rng):
    """Exact prior draw of the shared-weights gamma mixture model.

    With equal jumps all n+m latent draws come from one discrete measure on
    the product space, so the combined partition is a theta-weighted
    seating process; each cluster carries jointly sampled coordinates for
    the samples it touches, and the tilt pair has an exact Beta/Dirichlet
    transform law given the sample sizes.
    """
    lab = crp_partition(n + m, theta, rng)
    lx, ly = lab[:n], lab[n:]
    values = {}
    chol = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    for cid in np.unique(lab):
        has_x = bool(np.any(lx == cid))
        has_y = bool(np.any(ly == cid))
        if has_x and has_y:
            v = chol @ rng.standard_normal(2)
            values[int(cid)] = {0: float(v[0]), 1: float(v[1])}
        elif has_x:
            values[int(cid)] = {0: float(rng.standard_normal())}
        else:
            values[int(cid)] = {1: float(rng.standard_normal())}
    u = np.array(sample_u_exact_gamma(n, m, theta, rng))
    w = np.array([values[int(c)][0] for c in lx]) + rng.standard_normal(n)
    v = np.array([values[int(c)][1] for c in ly]) + rng.standard_normal(m)
    return lx, ly, values, u, w, v


def partition_stats(lx, ly, u1, w, v):
    k = len(np.unique(lx))
    c = len(np.unique(ly))
    delta = len(np.intersect1d(np.unique(lx), np.unique(ly)))
    return (k, c, delta, u1, float(np.mean(w)), float(np.mean(v)))


def geweke_streams(n: int, m: int, theta: float, rho: float, n_samples: int,
                   thin: int, seed: int):
    """Forward and successive-conditional statistic streams (fixed hypers)."""
    rng = np.random.default_rng(seed)
    spec = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta)
    g0 = BaseMeasure.bivariate_gaussian(rho)
    fwd = np.empty((n_samples, 6))
    for r in range(n_samples):
        lx, ly, values, u, w, v = forward_gamma_mixture(n, m, theta, rho, rng)
        fwd[r] = partition_stats(lx, ly, u[0], w, v)

    lx, ly, values, u, w, v = forward_gamma_mixture(n, m, theta, rho, rng)
    chain = make_two_sample_chain(spec, g0, w, v, 1.0, HyperPriors(), rng)
    chain.u_walk.frozen = True
    chain.set_state([lx, ly], values, u)
    sc = np.empty((n_samples, 6))
    kept = 0
    t = 0
    while kept < n_samples:
        for g, n_g in ((0, n), (1, m)):
            for i in range(n_g):
                chain.data[g][i, 0] = chain.obs_latent(g, i) + rng.standard_normal()
        chain.sweep()
        t += 1
        if t % thin == 0:
            sc[kept] = partition_stats(chain.labels[0], chain.labels[1], chain.u[0],
                                       chain.data[0][:, 0], chain.data[1][:, 0])
            kept += 1
    return fwd, sc
