"""One-dimensional quadrature for Gaussian-decaying integrands.

Everything in this package integrates against a prior density that decays
like a Gaussian, so a composite Gauss-Legendre rule on a finite cut of the
domain is both fast and accurate.  ``integrate`` refines the panel count
until two successive estimates agree; the matrix-valued integrals in
:mod:`bayessep.personick` reuse :func:`gauss_legendre_grid` directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate as _sp_integrate
from scipy.special import gammaln

__all__ = [
    "QuadratureError",
    "QuadratureSpec",
    "gauss_legendre_grid",
    "integrate",
    "halfline_gaussian_moment",
    "gaussian_cut",
]

#: Number of standard deviations kept on either side of a Gaussian bump.
N_SIGMA = 12.0


class QuadratureError(RuntimeError):
    """Raised when refinement fails to converge; carries the best estimate."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for :func:`integrate` and the grid-based matrix integrals.

    Attributes
    ----------
    rule : {'gauss-legendre-composite', 'adaptive'}
        ``adaptive`` delegates to QUADPACK (``scipy.integrate.quad``).
    nodes_per_panel : int
        Gauss-Legendre order on each panel.
    domain_cut : float or None
        Half-width ``L`` used when a domain end is infinite.
    rel_tol : float
        Relative agreement demanded between successive refinements.
    panel_width : float
        Initial panel width; integrands here vary on scales >= 0.5.
    max_panels : int
        Refinement budget.
    """

    rule: str = "gauss-legendre-composite"
    nodes_per_panel: int = 20
    domain_cut: float | None = None
    rel_tol: float = 1e-12
    panel_width: float = 0.5
    max_panels: int = 1 << 16

    def __post_init__(self):
        if self.rule not in ("gauss-legendre-composite", "adaptive"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be >= 2")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.domain_cut is not None and not self.domain_cut > 0:
            raise ValueError("domain_cut must be positive")
        if not self.panel_width > 0:
            raise ValueError("panel_width must be positive")


DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=32)
def _leggauss(n: int):
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_grid(a: float, b: float, panels: int, nodes_per_panel: int = 20):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``."""
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    panels = max(int(panels), 1)
    x, w = _leggauss(nodes_per_panel)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def gaussian_cut(mu: float, sigma: float, lower: float | None = 0.0):
    """Finite window ``[lo, hi]`` outside which ``exp(-(q-mu)^2/2sigma^2)`` is
    negligible relative to its maximum over ``q >= lower``.

    For ``mu`` far below ``lower`` the density on the half-line is
    essentially exponential with rate ``(lower - mu)/sigma^2``; the window
    shrinks accordingly so that panels still resolve it.
    """
    if lower is None:
        return mu - N_SIGMA * sigma, mu + N_SIGMA * sigma
    lo = max(lower, mu - N_SIGMA * sigma)
    width = N_SIGMA * sigma
    if mu < lower:
        # exp(-(q-lower)*(lower-mu)/sigma^2) reaches e^-72 after this distance
        width = min(width, N_SIGMA**2 / 2 * sigma**2 / (lower - mu))
    hi = max(mu, lower) + width
    return lo, hi


def _gl_sum(f, a, b, panels, order):
    x, w = gauss_legendre_grid(a, b, panels, order)
    return float(np.dot(w, f(x)))


def _composite(f, a, b, spec: QuadratureSpec):
    panels = max(1, math.ceil((b - a) / spec.panel_width))
    value = _gl_sum(f, a, b, panels, spec.nodes_per_panel)
    while True:
        panels *= 2
        if panels > spec.max_panels:
            raise QuadratureError(
                f"no convergence on [{a}, {b}] within {spec.max_panels} panels",
                value, float("nan"))
        refined = _gl_sum(f, a, b, panels, spec.nodes_per_panel)
        err = abs(refined - value)
        if err <= spec.rel_tol * abs(refined) or err <= 1e-300:
            return refined, err
        value = refined


def integrate(f: Callable[[np.ndarray], np.ndarray], domain, spec: QuadratureSpec | None = None):
    """Integrate a vectorised real function over ``domain``.

    Parameters
    ----------
    f : callable
        Maps an array of abscissae to an array of values of the same shape.
    domain : tuple of float
        ``(a, b)``; either end may be infinite, in which case it is replaced
        by ``-/+ spec.domain_cut`` (required) and the cut is re-checked at
        1.5 times its size.
    spec : QuadratureSpec, optional

    Returns
    -------
    value, error_estimate : float
    """
    spec = spec or DEFAULT_SPEC
    a, b = map(float, domain)
    if spec.rule == "adaptive":
        value, err = _sp_integrate.quad(lambda t: float(f(np.asarray(t))), a, b,
                                        epsabs=0.0, epsrel=max(spec.rel_tol, 1e-14), limit=500)
        return value, err

    infinite = (math.isinf(a), math.isinf(b))
    if not any(infinite):
        return _composite(f, a, b, spec)
    if spec.domain_cut is None:
        raise ValueError("infinite domain needs spec.domain_cut")

    def cut(L):
        lo = -L if infinite[0] else a
        hi = L if infinite[1] else b
        return lo, hi

    L = spec.domain_cut
    value, err = _composite(f, *cut(L), spec)
    for _ in range(20):
        wider, werr = _composite(f, *cut(1.5 * L), spec)
        if abs(wider - value) <= spec.rel_tol * abs(wider) or abs(wider - value) <= 1e-300:
            return wider, max(werr, abs(wider - value))
        L *= 1.5
        value, err = wider, werr
    raise QuadratureError("domain cut did not stabilise", value, err)


def halfline_gaussian_moment(k: int, A: float) -> float:
    """Exact ``int_0^inf q^(k+1) exp(-A q^2) dq = Gamma((k+2)/2) / (2 A^((k+2)/2))``."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a non-negative integer")
    if not A > 0:
        raise ValueError("A must be positive")
    p = (k + 2) / 2
    return 0.5 * math.exp(gammaln(p) - p * math.log(A))
