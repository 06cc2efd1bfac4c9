import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from furbi.special import bvn_cdf, bvn_rectangle, hyp3f2_unit

# frozen value of the 1e7-term brute-force summation of 3F2(1,1,1;3,3;1)
BRUTE_3F2_111_33 = 1.1594725347858115


def test_3f2_gauss_collapse():
    # one upper parameter cancels a lower one: 2F1(1,1;3;1) = 2
    assert hyp3f2_unit(3, 1, 1, 3, 3) == pytest.approx(2.0, abs=1e-10)


def test_3f2_gauss_collapse_b4():
    # 2F1(1,1;4;1) = Gamma(4)Gamma(2)/(Gamma(3)Gamma(3)) = 1.5
    assert hyp3f2_unit(5, 1, 1, 5, 4) == pytest.approx(1.5, abs=1e-10)
    assert hyp3f2_unit(2.25, 1, 1, 2.25, 4) == pytest.approx(1.5, abs=1e-10)


def test_3f2_brute_force_oracle():
    assert hyp3f2_unit(1, 1, 1, 3, 3) == pytest.approx(BRUTE_3F2_111_33, abs=1e-10)


def test_3f2_gauss_identity_grid():
    # 2F1(a,b;c;1) = G(c)G(c-a-b)/(G(c-a)G(c-b)) via a cancelling parameter
    for a, b, c in [(0.5, 1.0, 3.0), (1.2, 0.7, 4.4), (2.0, 1.5, 5.0)]:
        expected = math.exp(math.lgamma(c) + math.lgamma(c - a - b)
                            - math.lgamma(c - a) - math.lgamma(c - b))
        assert hyp3f2_unit(7.7, a, b, 7.7, c) == pytest.approx(expected, rel=1e-10)


def test_3f2_divergent_rejected():
    with pytest.raises(ValueError):
        hyp3f2_unit(2, 2, 2, 2, 2)  # margin -2


def test_3f2_terminating():
    # a nonpositive-integer upper parameter terminates the series
    val = hyp3f2_unit(-2, 1, 1, 3, 3)
    expected = 1.0 + (-2) * 1 * 1 / (3 * 3 * 1) + ((-2) * (-1)) * 2 * 2 / (3 * 4 * 3 * 4 * 2)
    assert val == pytest.approx(expected, rel=1e-12)


def test_bvn_independence():
    assert bvn_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("rho", [-0.99, -0.5, -0.1, 0.3, 0.8, 0.99])
def test_bvn_orthant_identity(rho):
    assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(
        0.25 + math.asin(rho) / (2.0 * math.pi), abs=1e-12)


def test_bvn_full_mass():
    assert bvn_cdf(8.0, 8.0, 0.5) == pytest.approx(1.0, abs=1e-10)


def test_bvn_degenerate_limits():
    assert bvn_cdf(0.3, 1.0, 1.0) == pytest.approx(norm.cdf(0.3), abs=1e-14)
    assert bvn_cdf(0.3, -0.2, -1.0) == pytest.approx(
        max(0.0, norm.cdf(0.3) + norm.cdf(-0.2) - 1.0), abs=1e-14)


@pytest.mark.parametrize("x,y,rho", [
    (0.5, -0.3, 0.7), (-1.2, 2.0, -0.85), (1.0, 1.0, 0.25), (-0.4, -0.6, -0.4),
])
def test_bvn_against_scipy(x, y, rho):
    ref = multivariate_normal(cov=[[1.0, rho], [rho, 1.0]]).cdf([x, y])
    assert bvn_cdf(x, y, rho) == pytest.approx(float(ref), abs=5e-8)


def test_bvn_marginalization_consistency():
    # P(X <= x) is recovered at y -> +inf (tested at 8), and the antipodal
    # reflection obeys the inclusion-exclusion identity
    # bvn(-x,-y,rho) = 1 - Phi(x) - Phi(y) + bvn(x,y,rho)
    for x in (-1.0, 0.2, 1.7):
        for rho in (-0.8, 0.0, 0.6):
            assert bvn_cdf(x, 8.0, rho) == pytest.approx(norm.cdf(x), abs=1e-9)
            for y in (-0.5, 0.9):
                lhs = bvn_cdf(-x, -y, rho)
                rhs = 1.0 - norm.cdf(x) - norm.cdf(y) + bvn_cdf(x, y, rho)
                assert lhs == pytest.approx(rhs, abs=1e-10)


def test_bvn_rectangle():
    # rectangle probability by inclusion-exclusion agrees with quadrature
    from scipy import integrate
    rho = -0.6
    val = bvn_rectangle(-0.5, 1.0, -1.0, 0.3, rho)
    dens = multivariate_normal(cov=[[1.0, rho], [rho, 1.0]])
    ref, _ = integrate.dblquad(lambda y, x: dens.pdf([x, y]), -0.5, 1.0, -1.0, 0.3)
    assert val == pytest.approx(ref, abs=1e-8)
