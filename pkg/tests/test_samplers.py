import math

import numpy as np
import pytest
from scipy import integrate, stats

from furbi.base_measures import BaseMeasure, mvn_logpdf
from furbi.dependence import beta_closed, gamma_closed
from furbi.latent import labels_to_structure, validate
from furbi.levy import LevyFamily, LevySpec
from furbi.samplers import (GammaPrior, HyperPriors, MarginalChain, NIGAtoms,
                            gibbs_sweep_mixture, make_two_sample_chain,
                            predictive_weights_conditional, sample_first_pair,
                            sample_within_pair, update_u)
from furbi.special import bvn_rectangle

from oracles import forward_gamma_mixture

GAMMA = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0)


def small_chain(spec=GAMMA, rho=0.0, seed=0, n=6, m=8, priors=None):
    rng = np.random.default_rng(seed)
    g0 = BaseMeasure.bivariate_gaussian(rho)
    x = rng.normal(0.0, 2.0, n)
    y = rng.normal(0.0, 2.0, m)
    return make_two_sample_chain(spec, g0, x, y, 1.0, priors or HyperPriors(), rng)


# ---------------------------------------------------------------------------
# tilt updates


def test_update_u_walk_accepts_identity_proposal():
    # with a zero step the proposal equals the current point: always accepted
    ch = small_chain(LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 0.5), seed=1)
    ch.u_walk.log_step = -np.inf
    ch.u_walk.frozen = True
    before = ch.u.copy()
    for _ in range(20):
        ch.update_u()
    assert ch.u_walk.accepted == ch.u_walk.proposed == 20
    assert np.allclose(ch.u, before)


def test_update_u_exact_matches_quadrature_mean():
    # single hyper-tied cluster, one observation per sample: the tilt target
    # is the two-count moment times the joint-exponent factor; at theta = 3
    # the posterior mean of U1 is 1/2 by the Beta transform, cross-checked
    # against direct quadrature
    theta = 3.0
    spec = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta)
    rng = np.random.default_rng(2)
    ch = make_two_sample_chain(spec, BaseMeasure.bivariate_gaussian(0.0),
                               np.array([0.0]), np.array([0.1]), 1.0, HyperPriors(), rng)
    ch.set_state([np.array([0]), np.array([0])], {0: {0: 0.0, 1: 0.1}})
    draws = np.empty(200000)
    for t in range(len(draws)):
        ch.update_u()
        draws[t] = ch.u[0]

    def dens(u1, u2):
        return (1.0 + u1 + u2) ** -(2.0 + theta)

    num, _ = integrate.dblquad(lambda v, u: u * dens(u, v), 0, 400, 0, 400)
    den, _ = integrate.dblquad(dens, 0, 400, 0, 400)
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - num / den) < 3 * se


def test_update_u_walk_invariance():
    # starting repeatedly from exact conditional draws, one Metropolis move
    # must preserve the distribution (binned chi-square on U1/(1+U1+U2))
    theta = 1.0
    spec = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta)
    rng = np.random.default_rng(3)
    ch = make_two_sample_chain(spec, BaseMeasure.bivariate_gaussian(0.0),
                               np.array([0.0]), np.array([0.1]), 1.0, HyperPriors(), rng)
    ch.set_state([np.array([0]), np.array([0])], {0: {0: 0.0, 1: 0.1}})
    ch.u_walk.frozen = True
    n = 60000
    before = np.empty(n)
    after = np.empty(n)
    for t in range(n):
        ch.update_u()  # exact draw
        before[t] = ch.u[0] / (1.0 + ch.u.sum())
        ch.update_u(force_walk=True)  # one Metropolis move
        after[t] = ch.u[0] / (1.0 + ch.u.sum())
    bins = np.quantile(before, np.linspace(0, 1, 11))
    bins[0], bins[-1] = 0.0, 1.0
    h_before = np.histogram(before, bins)[0]
    h_after = np.histogram(after, bins)[0]
    chi2 = np.sum((h_after - h_before) ** 2 / (h_before + h_after))
    # 9 dof at the 0.001 level is about 27.9
    assert chi2 < 27.9


def test_update_u_functional_surface():
    ch = small_chain(seed=4)
    u1, u2 = update_u(ch)
    assert u1 > 0 and u2 > 0


# ---------------------------------------------------------------------------
# allocation sweeps


def test_sweep_weights_normalize_and_labels_stay_compatible():
    ch = small_chain(rho=-0.7, seed=5)
    for _ in range(50):
        gibbs_sweep_mixture(ch)
        ids, logw = ch._alloc_logweights(0, ch.data[0][0])
        w = np.exp(logw - logw.max())
        assert np.all(w >= 0)
        assert w.sum() > 0
        p, _, _ = labels_to_structure(ch.label_arrays())
        assert validate(p) is None
        for cid, cl in ch.clusters.items():
            assert cl.total >= 1


def test_additive_z1_never_shares_clusters():
    spec = LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 1.0)
    ch = small_chain(spec, rho=0.9, seed=6)
    for _ in range(100):
        ch.sweep()
        shared = np.intersect1d(np.unique(ch.labels[0]), np.unique(ch.labels[1]))
        assert len(shared) == 0


def test_diagonal_g0_cross_weight_is_kernel_at_shared_value():
    # with fully shared atoms the cross-sample weight reduces to the kernel
    # evaluated at the other sample's unique value
    spec = GAMMA
    rng = np.random.default_rng(7)
    g0 = BaseMeasure.diagonal_degenerate()
    ch = make_two_sample_chain(spec, g0, np.array([0.5]), np.array([2.0]), 1.0,
                               HyperPriors(), rng)
    ch.set_state([np.array([0]), np.array([1])], {0: {0: 0.5}, 1: {0: 2.0}})
    w = ch.data[0][0]
    cl_y = ch.clusters[1]
    dens = ch.atoms.pred_logdens(cl_y, 0, w)
    expected = -0.5 * (math.log(2 * math.pi) + (0.5 - 2.0) ** 2)
    assert dens == pytest.approx(expected, rel=1e-12)


def test_prior_sweeps_recover_hyper_tie_probability():
    # no-likelihood sweeps: regenerating data from the latents at every step
    # makes the chain sample the prior; the hyper-tie fraction of pairs
    # matches the closed form
    theta = 1.0
    rng = np.random.default_rng(8)
    lx, ly, values, u, w, v = forward_gamma_mixture(1, 1, theta, 0.0, rng)
    ch = make_two_sample_chain(GAMMA, BaseMeasure.bivariate_gaussian(0.0),
                               w, v, 1.0, HyperPriors(), rng)
    ch.set_state([lx, ly], values, u)
    hits = []
    for t in range(4000):
        for g in (0, 1):
            ch.data[g][0, 0] = ch.obs_latent(g, 0) + rng.standard_normal()
        ch.sweep()
        if t % 2:
            hits.append(ch.labels[0][0] == ch.labels[1][0])
    frac = np.mean(hits)
    gam = gamma_closed(LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta))
    assert abs(frac - gam) < 4 * math.sqrt(gam * (1 - gam) / len(hits))


def test_exchangeable_limit_recovers_crp_ratios():
    # shared atoms, rho0 = 1: prior allocation of a two-sample chain follows
    # single-urn seating; check new-cluster frequency theta/(theta+n) with
    # no-likelihood sweeps on a tiny configuration
    theta = 1.0
    rng = np.random.default_rng(9)
    g0 = BaseMeasure.diagonal_degenerate()
    lx, ly = np.array([0, 0]), np.array([0])
    values = {0: {0: 0.3}}
    ch = make_two_sample_chain(GAMMA, g0, np.array([0.3, 0.3]), np.array([0.3]),
                               1.0, HyperPriors(), rng)
    ch.set_state([lx, ly], values, np.array([1.0, 1.0]))
    k_counts = []
    for t in range(6000):
        for g in range(2):
            for i in range(len(ch.data[g])):
                ch.data[g][i, 0] = ch.obs_latent(g, i) + rng.standard_normal()
        ch.sweep()
        if t % 3 == 2:
            k_counts.append(len(ch.clusters))
    # seating of 3 customers at theta = 1: E[#tables] = 1 + 1/2 + 1/3
    expected = 1.0 + 0.5 + 1.0 / 3.0
    se = np.std(k_counts) / math.sqrt(len(k_counts))
    assert abs(np.mean(k_counts) - expected) < 5 * se


# ---------------------------------------------------------------------------
# hyperparameter updates


def test_theta_prior_recovery():
    # free theta with no informative data path: running the full chain on
    # regenerated data keeps theta at its prior
    rng = np.random.default_rng(10)
    theta0 = rng.gamma(2.0) / 2.0
    lx, ly, values, u, w, v = forward_gamma_mixture(3, 3, theta0, 0.0, rng)
    ch = make_two_sample_chain(LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta0),
                               BaseMeasure.bivariate_gaussian(0.0), w, v, 1.0,
                               HyperPriors(theta=GammaPrior(2.0, 2.0)), rng)
    ch.set_state([lx, ly], values, u)
    thetas = []
    for t in range(15000):
        for g in (0, 1):
            for i in range(len(ch.data[g])):
                ch.data[g][i, 0] = ch.obs_latent(g, i) + rng.standard_normal()
        ch.sweep()
        if t % 10 == 9:
            thetas.append(ch.spec.theta)
    thetas = np.array(thetas)
    se = thetas.std() / math.sqrt(len(thetas) / 8.0)  # allow residual autocorr
    assert abs(thetas.mean() - 1.0) < 3 * se


def test_rho_proposal_reflects_into_box():
    from furbi.samplers import _reflect
    assert _reflect(1.2, -1.0, 1.0) == pytest.approx(0.8)
    assert _reflect(-1.7, -1.0, 1.0) == pytest.approx(-0.3)
    assert _reflect(0.4, -1.0, 1.0) == pytest.approx(0.4)
    assert -1.0 <= _reflect(7.3, -1.0, 1.0) <= 1.0


def test_corr_move_targets_exact_conditional():
    # freeze one hyper-tied cluster; the correlation move must sample the
    # normalized conditional of rho given the materialized pair
    rng = np.random.default_rng(11)
    ch = make_two_sample_chain(GAMMA, BaseMeasure.bivariate_gaussian(0.2),
                               np.array([0.1]), np.array([0.2]), 1.0,
                               HyperPriors(rho0="uniform"), rng)
    ch.set_state([np.array([0]), np.array([0])], {0: {0: 1.2, 1: -0.7}})
    draws = np.empty(30000)
    for t in range(len(draws)):
        for _ in range(5):
            ch.update_corr(step=0.4)
        draws[t] = float(ch.atoms.corr_param()[0, 1])

    grid = np.linspace(-0.9999, 0.9999, 2001)
    dens = np.array([math.exp(mvn_logpdf(np.array([1.2, -0.7]), np.zeros(2),
                                         np.array([[1.0, r], [r, 1.0]])))
                     for r in grid])
    mean_exact = float(np.trapezoid(grid * dens, grid) / np.trapezoid(dens, grid))
    se = draws.std() / math.sqrt(len(draws) / 10.0)
    assert abs(draws.mean() - mean_exact) < 3 * se


def test_pd_violating_triplet_rejected():
    # a proposal outside the positive-definite region can never be accepted
    from furbi.base_measures import build_corr_matrix
    assert build_corr_matrix([0.9, 0.9, -0.9], 3) is None
    rng = np.random.default_rng(12)
    corr = np.eye(3)
    g0 = BaseMeasure.multivariate_gaussian(corr)
    from furbi.samplers import GaussianAtoms
    atoms = GaussianAtoms(g0, [[0], [1], [2]], np.ones(3))
    data = [rng.normal(size=4) for _ in range(3)]
    ch = MarginalChain(LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0), atoms, data,
                       HyperPriors(corr="uniform"), rng)
    for _ in range(300):
        ch.sweep()
        mat = ch.atoms.corr_param()
        assert np.min(np.linalg.eigvalsh(mat)) > 0


# ---------------------------------------------------------------------------
# predictive machinery


def test_predictive_weights_empty_data():
    rng = np.random.default_rng(13)
    ch = make_two_sample_chain(GAMMA, BaseMeasure.bivariate_gaussian(0.3),
                               np.zeros(0), np.zeros(0), 1.0, HyperPriors(), rng)
    assert predictive_weights_conditional(ch) == {"new": 1.0}


def test_predictive_weights_sum_to_one():
    ch = small_chain(seed=14)
    for _ in range(20):
        ch.sweep()
    w = predictive_weights_conditional(ch, 0)
    assert sum(w.values()) == pytest.approx(1.0, rel=1e-12)
    assert all(v >= 0 for v in w.values())


@pytest.mark.parametrize("spec", [
    GAMMA,
    LevySpec(LevyFamily.INV_GAUSS_EQUAL_JUMPS, 1.0),
    LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 0.5),
])
def test_first_pair_law(spec):
    # P(X1 in A, Y1 in B) = gamma G0(A x B) + (1-gamma) P0(A) P0(B)
    rho = -0.6
    g0 = BaseMeasure.bivariate_gaussian(rho)
    rng = np.random.default_rng(15)
    n = 5 * 10 ** 4
    a = (-1.0, 0.5)
    b = (-0.2, 1.4)
    hits = 0
    for _ in range(n):
        x1, y1 = sample_first_pair(spec, g0, rng)
        hits += (a[0] < x1 <= a[1]) and (b[0] < y1 <= b[1])
    gam = gamma_closed(spec)
    p_a = stats.norm.cdf(a[1]) - stats.norm.cdf(a[0])
    p_b = stats.norm.cdf(b[1]) - stats.norm.cdf(b[0])
    expected = gam * bvn_rectangle(a[0], a[1], b[0], b[1], rho) + (1 - gam) * p_a * p_b
    se = math.sqrt(expected * (1 - expected) / n)
    assert abs(hits / n - expected) < 3 * se


@pytest.mark.parametrize("spec", [
    GAMMA,
    LevySpec(LevyFamily.INV_GAUSS_EQUAL_JUMPS, 1.0),
    LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 0.5),
])
def test_within_pair_law(spec):
    # P(X1 in A, X2 in B) = beta P0(A and B) + (1-beta) P0(A) P0(B)
    g0 = BaseMeasure.bivariate_gaussian(0.4)
    rng = np.random.default_rng(16)
    n = 5 * 10 ** 4
    a = (-1.0, 0.8)
    b = (0.0, 2.0)
    hits = 0
    for _ in range(n):
        x1, x2 = sample_within_pair(spec, g0, rng)
        hits += (a[0] < x1 <= a[1]) and (b[0] < x2 <= b[1])
    beta = beta_closed(spec)
    p_a = stats.norm.cdf(a[1]) - stats.norm.cdf(a[0])
    p_b = stats.norm.cdf(b[1]) - stats.norm.cdf(b[0])
    p_ab = stats.norm.cdf(min(a[1], b[1])) - stats.norm.cdf(max(a[0], b[0]))
    expected = beta * max(p_ab, 0.0) + (1 - beta) * p_a * p_b
    se = math.sqrt(expected * (1 - expected) / n)
    assert abs(hits / n - expected) < 3 * se


def test_invgauss_allocation_coefficients():
    # two observations, one per sample, inverse-Gaussian equal jumps: the
    # allocation weights follow the (count - 1/2) * 2 / (2U + 1) pattern
    spec = LevySpec(LevyFamily.INV_GAUSS_EQUAL_JUMPS, 1.3)
    rng = np.random.default_rng(17)
    ch = make_two_sample_chain(spec, BaseMeasure.bivariate_gaussian(0.0),
                               np.array([0.4]), np.array([0.6]), 1.0,
                               HyperPriors(), rng)
    ch.set_state([np.array([0]), np.array([1])], {0: {0: 0.4}, 1: {1: 0.6}},
                 np.array([0.7, 0.9]))
    from furbi.levy import log_tau_ratio, log_tau_new
    u = ch.u
    big_u = u.sum()
    # joining the other-sample cluster (count 1) vs opening a new one
    ratio = math.exp(log_tau_ratio(spec, np.array([0, 1]), 0, u))
    assert ratio == pytest.approx(2.0 * 0.5 / (2.0 * big_u + 1.0), rel=1e-12)
    new = spec.theta * math.exp(log_tau_new(spec, 0, u))
    assert new == pytest.approx(spec.theta / math.sqrt(2.0 * big_u + 1.0), rel=1e-12)


# ---------------------------------------------------------------------------
# NIG strategy internals


def test_nig_cross_side_weight_matches_quadrature():
    g0 = BaseMeasure.normal_invgamma_pair(0.6, mean=(0.2, -0.1))
    atoms = NIGAtoms(g0, 2)
    from furbi.samplers import Cluster
    cl = Cluster(2)
    cl.values[1] = (0.9, 1.7)  # other side materialized
    w = np.array([0.5])
    got = math.exp(atoms.pred_logdens(cl, 0, w))
    p = g0.nig
    rho = 0.6
    cc = rho * math.sqrt(p.lambda2 / p.lambda1) * (0.9 - (-0.1)) / math.sqrt(1.7)
    dd = 1.0 + (1.0 - rho * rho) / p.lambda1

    def integrand(s2):
        ig = (p.beta1 ** p.alpha1) / math.gamma(p.alpha1) * s2 ** (-p.alpha1 - 1) \
            * math.exp(-p.beta1 / s2)
        mean = 0.2 + cc * math.sqrt(s2)
        var = dd * s2
        return ig * math.exp(-0.5 * (0.5 - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)

    ref, _ = integrate.quad(integrand, 0, np.inf)
    assert got == pytest.approx(ref, rel=1e-6)


def test_nig_cross_join_materialization_law():
    # the rejection sampler for the joining side's squared scale must hit
    # the exact conditional; validate first moments against quadrature
    g0 = BaseMeasure.normal_invgamma_pair(0.6, mean=(0.0, 0.0))
    atoms = NIGAtoms(g0, 2)
    from furbi.samplers import Cluster
    rng = np.random.default_rng(18)
    w = np.array([0.8])
    draws = []
    for _ in range(20000):
        cl = Cluster(2)
        cl.values[1] = (0.9, 1.7)
        atoms.on_join(cl, 0, w, rng)
        draws.append(cl.values[0][1])
    draws = np.array(draws)
    p = g0.nig
    rho = 0.6
    cc = rho * (0.9) / math.sqrt(1.7)
    dd = 1.0 + (1.0 - rho * rho)

    def unnorm(s2):
        ig = s2 ** (-p.alpha1 - 1) * math.exp(-p.beta1 / s2)
        mean = cc * math.sqrt(s2)
        return ig * math.exp(-0.5 * (0.8 - mean) ** 2 / (dd * s2)) / math.sqrt(s2)

    z, _ = integrate.quad(unnorm, 0, np.inf)
    m1, _ = integrate.quad(lambda s2: s2 * unnorm(s2), 0, np.inf)
    se = draws.std() / math.sqrt(len(draws))
    assert abs(draws.mean() - m1 / z) < 3.5 * se


def test_nig_single_side_refresh_matches_conjugate_posterior():
    g0 = BaseMeasure.normal_invgamma_pair(0.0)
    atoms = NIGAtoms(g0, 2)
    from furbi.samplers import Cluster
    rng = np.random.default_rng(19)
    data = np.array([1.0, 1.4, 0.6])
    locs = []
    for _ in range(20000):
        cl = Cluster(2)
        cl.values[0] = (0.0, 1.0)
        atoms.refresh(cl, {0: data}, rng)
        locs.append(cl.values[0][0])
    p = g0.nig
    lam_n = p.lambda1 + 3
    m_n = (0.0 + data.sum()) / lam_n
    locs = np.array(locs)
    se = locs.std() / math.sqrt(len(locs))
    assert abs(locs.mean() - m_n) < 3.5 * se
