"""Adaptive quadrature over the positive half-line and quadrant.

All integrals over (0, inf) are mapped to (0, 1) through u = t/(1-t)
before handing the integrand to an adaptive Gauss-Kronrod routine
(QUADPACK via scipy).  The map concentrates nodes where exponentially
decaying integrands carry their mass, which is the regime every caller
in this package lives in.  Two-dimensional integrals are computed as
nested one-dimensional passes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from scipy import integrate


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and limits for the half-line integrators."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    map: str = "rational"  # u = t/(1-t)

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.map != "rational":
            raise ValueError("only the rational map u = t/(1-t) is supported")


class QuadratureError(RuntimeError):
    """Raised when the adaptive rule cannot meet the requested tolerance.

    Carries the best available estimate and its error bound so callers
    can decide whether to proceed anyway.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error_bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


def _tolerance(cfg: QuadratureConfig, value: float) -> float:
    return max(cfg.abs_tol, cfg.rel_tol * abs(value))


def integrate_halfline(f, cfg: QuadratureConfig | None = None) -> float:
    """Integrate f over (0, inf) after the u = t/(1-t) change of variables."""
    cfg = cfg or QuadratureConfig()

    def mapped(t):
        om = 1.0 - t
        return f(t / om) / (om * om)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            mapped, 0.0, 1.0,
            epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        )
    if err > 50.0 * _tolerance(cfg, value):
        raise QuadratureError("half-line quadrature did not converge", value, err)
    return value


def integrate_posneg_2d(f, cfg: QuadratureConfig | None = None) -> float:
    """Integrate f(u1, u2) over the positive quadrant.

    Nested adaptive passes on (0,1)^2 with the rational map applied to each
    axis.  The inner pass runs at a tightened tolerance so its error stays
    subdominant to the outer estimate.
    """
    cfg = cfg or QuadratureConfig()
    inner_abs = 0.1 * cfg.abs_tol
    inner_rel = 0.1 * cfg.rel_tol
    worst_inner = 0.0

    def outer(t1):
        nonlocal worst_inner
        om1 = 1.0 - t1
        u1 = t1 / om1
        j1 = 1.0 / (om1 * om1)

        def inner(t2):
            om2 = 1.0 - t2
            return f(u1, t2 / om2) / (om2 * om2)

        val, ierr = integrate.quad(
            inner, 0.0, 1.0,
            epsabs=inner_abs, epsrel=inner_rel, limit=cfg.max_subdivisions,
        )
        worst_inner = max(worst_inner, ierr)
        return val * j1

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(
            outer, 0.0, 1.0,
            epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        )
    total_err = err + worst_inner
    if total_err > 50.0 * _tolerance(cfg, value):
        raise QuadratureError("quadrant quadrature did not converge", value, total_err)
    return value
