"""Special functions: 3F2 at unit argument and the bivariate normal CDF."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, ndtr

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and abs(x - round(x)) < 1e-12


def _series_3f2(a1, a2, a3, b1, b2, rel_tol, max_terms):
    """Sum the unit-argument series with an algebraic tail correction.

    The terms decay like k^-(1+s) with s = b1+b2-a1-a2-a3, so a bare
    truncation at small relative terms leaves a tail of the same order
    as the last term times k/s.  After the stopping rule fires, the sum
    is continued to twice as many terms and Richardson-extrapolated in
    k^-s, which removes the leading tail to O(k^-(1+s)).
    """
    s = b1 + b2 - a1 - a2 - a3
    term = 1.0
    total = 1.0
    k = 0
    while True:
        term *= (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (1.0 + k))
        total += term
        k += 1
        if term == 0.0:
            return total  # terminating (polynomial) case
        if abs(term) <= rel_tol * abs(total) and k >= 8:
            break
        if k >= max_terms:
            raise ValueError(
                f"3F2 series did not converge within {max_terms} terms "
                f"(convergence margin {s:g})")
    stop_k = k
    partial = total
    while k < 2 * stop_k:
        term *= (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (1.0 + k))
        total += term
        k += 1
    return total + (total - partial) / (2.0 ** s - 1.0)


def hyp3f2_unit(a1: float, a2: float, a3: float, b1: float, b2: float,
                rel_tol: float = 1e-12, max_terms: int = 10 ** 6) -> float:
    """3F2(a1,a2,a3; b1,b2; 1) for parameter sets convergent at unit argument.

    Requires b1+b2-a1-a2-a3 > 0.  When the convergence margin is small the
    series is first rebalanced by a Thomae-type transformation pivoted on
    the largest upper parameter, which raises the margin to that parameter
    and keeps the summation short and accurate.
    """
    if _is_nonpositive_integer(b1) or _is_nonpositive_integer(b2):
        raise ValueError("lower parameters must not be non-positive integers")
    for a in (a1, a2, a3):
        if _is_nonpositive_integer(a):
            # terminating series: sum exactly
            return _series_3f2(a1, a2, a3, b1, b2, rel_tol, max_terms)
    s = b1 + b2 - a1 - a2 - a3
    if s <= 0:
        raise ValueError(
            f"divergent parameter set: b1+b2-a1-a2-a3 = {s:g} must be positive")
    a_hi, a_md, a_lo = sorted((a1, a2, a3), reverse=True)
    if s < 2.0 and a_hi > s and min(a1, a2, a3) > 0 and b1 - a_hi >= 0 and b2 - a_hi >= 0:
        # pivot: 3F2(a,b,c;d,e;1) = G * 3F2(d-a, e-a, s; s+b, s+c; 1),
        # with margin of the transformed series equal to a
        log_pref = (gammaln(b1) + gammaln(b2) + gammaln(s)
                    - gammaln(a_hi) - gammaln(s + a_md) - gammaln(s + a_lo))
        inner = _series_3f2(b1 - a_hi, b2 - a_hi, s, s + a_md, s + a_lo,
                            rel_tol, max_terms)
        return math.exp(log_pref) * inner
    return _series_3f2(a1, a2, a3, b1, b2, rel_tol, max_terms)


def _bvn_panel(x: float, y: float, lo: float, hi: float) -> float:
    r = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    omr2 = 1.0 - r * r
    dens = np.exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * omr2)) / np.sqrt(omr2)
    return 0.5 * (hi - lo) * float(np.dot(_GL_WEIGHTS, dens))


def bvn_cdf(x: float, y: float, rho: float) -> float:
    """Standard bivariate normal CDF P(X <= x, Y <= y) with correlation rho.

    Single-integral reduction over the correlation parameter,

        Phi2(x, y, rho) = Phi(x) Phi(y)
            + (1/2pi) int_0^rho exp(-(x^2 - 2 r x y + y^2)/(2(1-r^2)))
               / sqrt(1-r^2) dr,

    evaluated with 32-node Gauss-Legendre panels refined by doubling until
    the value is stable below 1e-12.  Degenerate |rho| >= 1 falls back to
    the comonotone / antimonotone limits.
    """
    if rho >= 1.0:
        return float(ndtr(min(x, y)))
    if rho <= -1.0:
        return float(max(0.0, ndtr(x) + ndtr(y) - 1.0))
    base = float(ndtr(x)) * float(ndtr(y))
    if rho == 0.0 or not (np.isfinite(x) and np.isfinite(y)):
        # at +-inf the integral term vanishes (density factor is 0)
        if np.isinf(x) or np.isinf(y):
            return min(1.0, max(0.0, base))
        if rho == 0.0:
            return base
    n_panels = 1
    prev = None
    while n_panels <= 64:
        edges = np.linspace(0.0, rho, n_panels + 1)
        acc = sum(_bvn_panel(x, y, edges[i], edges[i + 1]) for i in range(n_panels))
        val = base + acc / (2.0 * math.pi)
        if prev is not None and abs(val - prev) < 1e-12:
            break
        prev = val
        n_panels *= 2
    return min(1.0, max(0.0, val))


def bvn_rectangle(x_lo: float, x_hi: float, y_lo: float, y_hi: float,
                  rho: float) -> float:
    """P(x_lo < X <= x_hi, y_lo < Y <= y_hi) by inclusion-exclusion."""
    val = (bvn_cdf(x_hi, y_hi, rho) - bvn_cdf(x_lo, y_hi, rho)
           - bvn_cdf(x_hi, y_lo, rho) + bvn_cdf(x_lo, y_lo, rho))
    return min(1.0, max(0.0, val))
