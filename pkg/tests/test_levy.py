import math

import numpy as np
import pytest
from scipy import integrate

from furbi.levy import (LevyFamily, LevySpec, d2_psi_b, invert_tail_mass,
                        log_tau_ratio, log_tau_vec, psi, psi_b, psi_dd,
                        sample_u_exact_gamma, tail_mass, tau)

GAMMA = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0)
GAMMA2 = LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 2.0)
IG = LevySpec(LevyFamily.INV_GAUSS_EQUAL_JUMPS, 1.0)
ADD = LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 0.5)


def gamma_jump_density(s):
    return np.exp(-s) / s


def ig_jump_density(s):
    return np.exp(-0.5 * s) / (np.sqrt(2.0 * np.pi) * s ** 1.5)


def test_spec_validation():
    with pytest.raises(ValueError):
        LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, theta=0.0)
    with pytest.raises(ValueError):
        LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, z=1.5)
    with pytest.raises(ValueError):
        LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0)  # z required
    with pytest.raises(ValueError):
        LevySpec(LevyFamily.GAMMA_EQUAL_JUMPS, 1.0, z=0.3)


def test_psi_basics():
    assert psi(GAMMA, 0.0) == 0.0
    assert psi(GAMMA2, math.e - 1.0) == pytest.approx(2.0, abs=1e-12)
    assert psi(IG, 4.0) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        psi(GAMMA, -0.1)


def test_psi_quadrature_cross_check():
    # closed forms against direct quadrature of the defining integrals
    for u in (0.3, 2.0, 9.0):
        val, _ = integrate.quad(lambda s: (1 - np.exp(-u * s)) * gamma_jump_density(s),
                                0, np.inf)
        assert psi(GAMMA, u) == pytest.approx(val, rel=1e-8)
        # substitution s = t^2 removes the 1/sqrt(s) singularity at zero
        val, _ = integrate.quad(
            lambda t: 2.0 * (1 - np.exp(-u * t * t)) * np.exp(-0.5 * t * t)
            / (np.sqrt(2.0 * np.pi) * t * t), 0, np.inf)
        assert psi(IG, u) == pytest.approx(val, rel=1e-9)


def test_psi_b_trivial_and_marginal_consistency():
    for spec in (GAMMA, GAMMA2, IG, ADD, LevySpec(LevyFamily.ADDITIVE_GAMMA, 2.0, 0.0)):
        assert psi_b(spec, 0.0, 0.0) == 0.0
        for u in (0.1, 1.0, 7.3):
            assert psi_b(spec, u, 0.0) == pytest.approx(psi(spec, u), abs=1e-10)
            assert psi_b(spec, 0.0, u) == pytest.approx(psi(spec, u), abs=1e-10)


def test_psi_b_gamma_quadrature():
    # equal jumps: the defining integral collapses to one dimension
    val, _ = integrate.quad(lambda s: (1 - np.exp(-2.0 * s)) * gamma_jump_density(s),
                            0, np.inf)
    assert psi_b(GAMMA, 1.0, 1.0) == pytest.approx(val, rel=1e-9)
    assert psi_b(GAMMA, 1.0, 1.0) == pytest.approx(math.log(3.0), rel=1e-12)


def test_psi_b_additive_quadrature():
    th, z = 1.3, 0.4
    spec = LevySpec(LevyFamily.ADDITIVE_GAMMA, th, z)
    u1, u2 = 0.8, 1.7

    def defining(u1, u2):
        common, _ = integrate.quad(
            lambda s: (1 - np.exp(-(u1 + u2) * s)) * gamma_jump_density(s), 0, np.inf)
        own1, _ = integrate.quad(
            lambda s: (1 - np.exp(-u1 * s)) * gamma_jump_density(s), 0, np.inf)
        own2, _ = integrate.quad(
            lambda s: (1 - np.exp(-u2 * s)) * gamma_jump_density(s), 0, np.inf)
        return th * (z * own1 + z * own2 + (1 - z) * common)

    assert psi_b(spec, u1, u2) == pytest.approx(defining(u1, u2), rel=1e-9)


def test_additive_z1_is_independent_pair():
    spec = LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 1.0)
    assert psi_b(spec, 1.0, 1.0) == pytest.approx(2.0 * math.log(2.0), rel=1e-12)


def test_tau_examples():
    assert tau(GAMMA, 1, 0, 0.0, 0.0) == pytest.approx(1.0, rel=1e-12)
    # inverse-Gaussian: Gamma(1/2)/sqrt(pi) = 1 at j=1, u=0
    assert tau(IG, 1, 0, 0.0, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert tau(LevySpec(LevyFamily.ADDITIVE_GAMMA, 1.0, 1.0), 1, 1, 0.3, 0.9) == 0.0


def test_tau_errors():
    with pytest.raises(ValueError):
        tau(GAMMA, 0, 0, 1.0, 1.0)


@pytest.mark.parametrize("n,m", [(1, 0), (0, 1), (1, 1), (2, 1), (3, 3)])
@pytest.mark.parametrize("u1,u2", [(0.0, 0.0), (0.5, 1.5), (2.0, 0.25)])
def test_tau_gamma_matches_defining_quadrature(n, m, u1, u2):
    # equal jumps: s1 = s2 = s
    val, _ = integrate.quad(
        lambda s: s ** (n + m) * np.exp(-(u1 + u2) * s) * gamma_jump_density(s),
        0, np.inf)
    assert tau(GAMMA, n, m, u1, u2) == pytest.approx(val, rel=1e-6)


@pytest.mark.parametrize("n,m", [(1, 0), (1, 1), (2, 3)])
def test_tau_ig_matches_defining_quadrature(n, m):
    u1, u2 = 0.7, 0.4
    val, _ = integrate.quad(
        lambda s: s ** (n + m) * np.exp(-(u1 + u2) * s) * ig_jump_density(s),
        0, np.inf)
    assert tau(IG, n, m, u1, u2) == pytest.approx(val, rel=1e-8)


@pytest.mark.parametrize("n,m", [(1, 0), (0, 2), (1, 1), (2, 2)])
def test_tau_additive_matches_defining_quadrature(n, m):
    th, z = 1.0, 0.35
    spec = LevySpec(LevyFamily.ADDITIVE_GAMMA, th, z)
    u1, u2 = 0.9, 0.2
    common, _ = integrate.quad(
        lambda s: s ** (n + m) * np.exp(-(u1 + u2) * s) * gamma_jump_density(s),
        0, np.inf)
    val = (1 - z) * common
    if m == 0:
        own, _ = integrate.quad(
            lambda s: s ** n * np.exp(-u1 * s) * gamma_jump_density(s), 0, np.inf)
        val += z * own
    if n == 0:
        own, _ = integrate.quad(
            lambda s: s ** m * np.exp(-u2 * s) * gamma_jump_density(s), 0, np.inf)
        val += z * own
    assert tau(spec, n, m, u1, u2) == pytest.approx(val, rel=1e-8)


def test_tau_monotone_in_tilts():
    for spec in (GAMMA, IG, ADD):
        for n, m in [(1, 0), (1, 1), (2, 3)]:
            base = tau(spec, n, m, 0.5, 0.5)
            assert tau(spec, n, m, 0.9, 0.5) < base
            assert tau(spec, n, m, 0.5, 0.9) < base


def test_log_tau_ratio_consistency():
    u = np.array([0.7, 1.3])
    for spec in (GAMMA, IG, ADD):
        for counts in ([1, 0], [2, 1], [0, 3]):
            counts = np.array(counts)
            for g in (0, 1):
                direct = (log_tau_vec(spec, counts + np.eye(2, dtype=int)[g], u)
                          - log_tau_vec(spec, counts, u))
                assert log_tau_ratio(spec, counts, g, u) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("spec", [GAMMA, IG, ADD])
def test_mixed_partial_matches_finite_differences(spec):
    h = 1e-5
    for u1, u2 in [(0.3, 0.6), (1.5, 0.2), (2.0, 3.0)]:
        fd = (psi_b(spec, u1 + h, u2 + h) - psi_b(spec, u1 + h, u2 - h)
              - psi_b(spec, u1 - h, u2 + h) + psi_b(spec, u1 - h, u2 - h)) / (4 * h * h)
        assert d2_psi_b(spec, u1, u2) == pytest.approx(fd, rel=1e-4)


@pytest.mark.parametrize("spec", [GAMMA, GAMMA2, IG])
def test_psi_dd_matches_finite_differences(spec):
    h = 1e-5
    for u in (0.4, 1.1, 3.0):
        fd = (psi(spec, u + h) - 2 * psi(spec, u) + psi(spec, u - h)) / (h * h)
        assert psi_dd(spec, u) == pytest.approx(fd, rel=1e-4)


def test_tail_mass_matches_quadrature():
    shift = 0.7
    for s in (0.05, 0.5, 2.0):
        ref, _ = integrate.quad(lambda x: np.exp(-shift * x) * gamma_jump_density(x),
                                s, np.inf)
        assert tail_mass(LevyFamily.GAMMA_EQUAL_JUMPS, s, shift) == pytest.approx(ref, rel=1e-9)
        ref, _ = integrate.quad(lambda x: np.exp(-shift * x) * ig_jump_density(x),
                                s, np.inf)
        assert tail_mass(LevyFamily.INV_GAUSS_EQUAL_JUMPS, s, shift) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("family", [LevyFamily.GAMMA_EQUAL_JUMPS,
                                    LevyFamily.INV_GAUSS_EQUAL_JUMPS])
def test_tail_inversion_roundtrip(family):
    theta, shift = 1.5, 0.7
    xi = np.array([1e-3, 0.1, 1.0, 5.0, 30.0, 200.0])
    s = invert_tail_mass(family, xi, shift, theta)
    back = theta * tail_mass(family, s, shift)
    assert np.max(np.abs(back - xi) / xi) < 1e-8
    assert np.all(np.diff(s) < 0)  # descending jumps


def test_exact_u_draw_matches_quadrature_moments():
    # bounded functional E[u1/(1+u1+u2)] agrees with direct quadrature
    n, m, theta = 3, 2, 1.5
    rng = np.random.default_rng(7)
    draws = np.array([sample_u_exact_gamma(n, m, theta, rng) for _ in range(200000)])
    stat = draws[:, 0] / (1.0 + draws.sum(axis=1))

    def dens(u1, u2):
        return u1 ** (n - 1) * u2 ** (m - 1) * (1 + u1 + u2) ** -(n + m + theta)

    num, _ = integrate.dblquad(lambda v, u: dens(u, v) * u / (1 + u + v), 0, 200, 0, 200)
    den, _ = integrate.dblquad(dens, 0, 200, 0, 200)
    se = stat.std() / math.sqrt(len(stat))
    assert abs(stat.mean() - num / den) < 3 * se
