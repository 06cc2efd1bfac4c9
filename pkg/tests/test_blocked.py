import math

import numpy as np
import pytest

from furbi.base_measures import BaseMeasure
from furbi.blocked import BlockedChain, blocked_gibbs_equal_jumps, make_blocked_chain
from furbi.samplers import GammaPrior, HyperPriors


def test_truncation_validation():
    g0 = BaseMeasure.bivariate_gaussian(0.0)
    with pytest.raises(ValueError):
        BlockedChain(g0, [np.zeros(3), np.zeros(3)], 1.0, 1.0, truncation=0)


def test_single_component_truncation():
    # N = 1: everything lands in the one component with weight one
    rng = np.random.default_rng(0)
    ch = make_blocked_chain(BaseMeasure.bivariate_gaussian(0.0),
                            rng.normal(size=5), rng.normal(size=4),
                            truncation=1, rng=rng)
    blocked_gibbs_equal_jumps(ch)
    assert ch.weights.shape == (1,)
    assert ch.weights[0] == pytest.approx(1.0)
    assert all((lab == 0).all() for lab in ch.labels)


def test_stick_residual_mass_identity():
    # E[prod_{k<=N} (1 - V_k)] = (theta/(1+theta))^N for Beta(1, theta) sticks
    rng = np.random.default_rng(1)
    theta, n_trunc = 1.0, 20
    sims = rng.beta(1.0, theta, size=(200000, n_trunc))
    resid = np.prod(1.0 - sims, axis=1)
    expected = (theta / (1.0 + theta)) ** n_trunc
    se = resid.std() / math.sqrt(len(resid))
    assert abs(resid.mean() - expected) < 3 * se


def test_single_cluster_location_shrinkage():
    # all data in one component: the atom posterior follows the textbook
    # precision-weighted mean
    rng = np.random.default_rng(2)
    data = np.array([1.2, 0.8, 1.0, 1.1])
    g0 = BaseMeasure.bivariate_gaussian(0.0)
    ch = make_blocked_chain(g0, data, np.zeros(0), theta=1.0, kernel_sigma2=1.0,
                            truncation=1, rng=rng)
    draws = np.empty(20000)
    for t in range(len(draws)):
        ch._update_atoms()
        draws[t] = ch.atoms[0, 0]
    post_prec = 1.0 + len(data)
    post_mean = data.sum() / post_prec
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - post_mean) < 4 * se
    assert np.var(draws) == pytest.approx(1.0 / post_prec, rel=0.05)


def test_sweep_keeps_weights_normalized():
    rng = np.random.default_rng(3)
    ch = make_blocked_chain(BaseMeasure.bivariate_gaussian(-0.5),
                            rng.normal(2, 1, 30), rng.normal(-2, 1, 40),
                            truncation=15, rng=rng,
                            priors=HyperPriors(theta=GammaPrior(1, 1), rho0="uniform"))
    for _ in range(100):
        ch.sweep()
        assert ch.weights.sum() == pytest.approx(1.0, rel=1e-10)
        assert ch.theta > 0
        assert -1.0 <= ch.g0.corr[0, 1] <= 1.0
    dens = ch.density_on_grid(np.linspace(-4, 4, 50), 0)
    assert np.all(dens >= 0)


def test_density_grid_integrates_to_one():
    rng = np.random.default_rng(4)
    ch = make_blocked_chain(BaseMeasure.bivariate_gaussian(0.0),
                            rng.normal(0, 1, 25), rng.normal(0, 1, 25),
                            truncation=20, rng=rng)
    for _ in range(30):
        ch.sweep()
    grid = np.linspace(-8, 8, 401)
    dens = ch.density_on_grid(grid, 1)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


def test_blocked_negative_rho_found_on_opposite_means():
    # opposite-mean samples push the atom correlation negative
    rng = np.random.default_rng(5)
    ch = make_blocked_chain(BaseMeasure.bivariate_gaussian(0.0),
                            rng.normal(8, 1, 25), rng.normal(-8, 1, 60),
                            theta=1.0, truncation=20, rng=rng,
                            priors=HyperPriors(rho0="uniform"))
    rhos = []
    for t in range(400):
        ch.sweep()
        if t >= 100:
            rhos.append(ch.g0.corr[0, 1])
    assert np.median(rhos) < -0.3
