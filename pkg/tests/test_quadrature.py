import math

import numpy as np
import pytest

from furbi.quadrature import QuadratureConfig, QuadratureError, integrate_halfline, integrate_posneg_2d


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=-1)
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=0)
    with pytest.raises(ValueError):
        QuadratureConfig(map="log")


def test_product_exponential():
    assert integrate_posneg_2d(lambda u1, u2: math.exp(-u1 - u2)) == pytest.approx(1.0, abs=1e-10)


def test_separable_gamma():
    val = integrate_posneg_2d(lambda u1, u2: u1 * math.exp(-u1 - 2.0 * u2))
    assert val == pytest.approx(0.5, abs=1e-9)


def test_halfline_gamma_moments():
    for k in (1, 2, 5):
        val = integrate_halfline(lambda u, k=k: u ** (k - 1) * math.exp(-u))
        assert val == pytest.approx(math.gamma(k), rel=1e-9)


def test_hyper_tie_integrand_matches_closed_form():
    # the joint-exponent integrand for the unit-mass gamma family integrates
    # to the closed-form hyper-tie probability 1/(1+theta)
    theta = 1.0
    val = integrate_posneg_2d(
        lambda u1, u2: theta * (1.0 + u1 + u2) ** -(2.0 + theta))
    assert val == pytest.approx(0.5, abs=1e-8)


def test_divergent_integrand_raises():
    with pytest.raises(QuadratureError) as err:
        integrate_posneg_2d(lambda u1, u2: 1.0 / (1.0 + u1 + u2),
                            QuadratureConfig(max_subdivisions=30))
    assert err.value.error_bound > 0
