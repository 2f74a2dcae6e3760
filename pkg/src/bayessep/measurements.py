"""Mean square errors of two concrete measurements with posterior-mean estimators.

Photon-number-resolving detection (PNR) is the coherent-state image of
spatial-mode demultiplexing: outcome ``k`` occurs with the Poisson
probability ``exp(-q^2/2) (q^2/2)^k / k!``.  Homodyne detection of the
position quadrature is the image of direct imaging; for the two-source
state it has the likelihood

    P(x|q) = (exp(-(x-q)^2) + exp(-(x+q)^2)) / (2 sqrt(pi)).

For either measurement the Bayes error of the posterior mean is
``m2 - sum_outcomes N^2 / D`` with ``D = int P(q) P(o|q) dq`` and
``N = int P(q) q P(o|q) dq``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, xlogy

from .personick import prior_grid
from .priors import DisplacedHalfGaussianPrior, HalfGaussianPrior, Prior
from .quadrature import DEFAULT_SPEC, QuadratureError, QuadratureSpec, gauss_legendre_grid

__all__ = [
    "Posterior",
    "pnr_kmax",
    "mse_pnr",
    "mse_pnr_closed_form",
    "mse_homodyne",
    "posterior_mean_pnr",
    "posterior_mean_homodyne",
    "mc_mse",
]

TAIL_TOL = 1e-10
TAIL_ERROR = 1e-8
_KMAX_LIMIT = 20000
_LOG_2SQRTPI = math.log(2.0 * math.sqrt(math.pi))


class Posterior(NamedTuple):
    mean: np.ndarray
    fallback: np.ndarray  # True where the marginal likelihood vanished


def _halfline(prior):
    if not prior.halfline:
        raise ValueError("measurement MSEs are defined for half-line priors")


def _pnr_logpmf(k, q):
    lam = 0.5 * q * q
    return -lam[:, None] + xlogy(k[None, :], lam[:, None]) - gammaln(k + 1.0)[None, :]


def _pnr_tables(prior, k_max, spec):
    q, wp = prior_grid(prior, spec)
    k = np.arange(k_max + 1, dtype=float)
    like = np.exp(_pnr_logpmf(k, q))
    D = wp @ like
    N = (wp * q) @ like
    E2 = (wp * q * q) @ like
    return D, N, E2, float(wp.sum()), float(np.dot(wp, q * q))


def pnr_kmax(prior: Prior, tol: float = TAIL_TOL, spec: QuadratureSpec | None = None) -> int:
    """Smallest ``k_max`` for which both the prior-averaged probability of
    ``k > k_max`` and its ``q^2``-weighted counterpart fall below ``tol``."""
    _halfline(prior)
    lo, hi = prior.window()
    k_max = max(40, int(hi * hi))  # Poisson mean hi^2/2 plus a wide margin
    while k_max <= _KMAX_LIMIT:
        D, _, E2, mass, m2 = _pnr_tables(prior, k_max, spec)
        tail_p = mass - np.cumsum(D)
        tail_2 = m2 - np.cumsum(E2)
        ok = np.nonzero((tail_p < tol) & (tail_2 < tol * max(m2, 1.0)))[0]
        if ok.size:
            return int(ok[0])
        k_max *= 2
    raise QuadratureError("PNR tail does not fall below tolerance", float("nan"), float("nan"))


def mse_pnr(prior: Prior, k_max: int | None = None, spec: QuadratureSpec | None = None) -> float:
    """Bayes error of photon counting followed by the posterior mean.

    Outcomes beyond ``k_max`` are assigned the estimate 0, so a finite
    ``k_max`` can only over-estimate the error.  An explicit ``k_max``
    whose tail probability exceeds ``1e-8`` is rejected.
    """
    _halfline(prior)
    if k_max is None:
        k_max = pnr_kmax(prior, spec=spec)
    elif k_max < 0:
        raise ValueError("k_max must be non-negative")
    D, N, _, mass, m2 = _pnr_tables(prior, int(k_max), spec)
    tail = mass - D.sum()
    if tail > TAIL_ERROR:
        raise ValueError(f"k_max={k_max} leaves tail probability {tail:.2e}; increase k_max")
    pos = D > 0
    return m2 - float(np.sum(N[pos] ** 2 / D[pos]))


def mse_pnr_closed_form(sigma_or_prior) -> float:
    """Exact PNR error for the half-Gaussian prior,

    ``sigma^2 - 2 sigma^2 / (pi sqrt(sigma^2 + 1)) * (sigma asin(sigma / sqrt(sigma^2 + 1)) + 1)``.
    """
    if isinstance(sigma_or_prior, DisplacedHalfGaussianPrior):
        if not isinstance(sigma_or_prior, HalfGaussianPrior) and sigma_or_prior.mu != 0.0:
            raise ValueError("the closed form holds only for the undisplaced half-Gaussian")
        sigma = sigma_or_prior.sigma
    else:
        sigma = float(sigma_or_prior)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    root = math.sqrt(sigma * sigma + 1.0)
    return sigma**2 - 2.0 * sigma**2 / (math.pi * root) * (sigma * math.asin(sigma / root) + 1.0)


def posterior_mean_pnr(k, prior: Prior, spec: QuadratureSpec | None = None) -> Posterior:
    """``E[q | k]`` for photon counts ``k`` (array or scalar)."""
    _halfline(prior)
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k != np.floor(k)):
        raise ValueError("photon counts must be non-negative integers")
    q, wp = prior_grid(prior, spec)
    with np.errstate(divide="ignore"):
        logt = np.log(wp)[:, None] + _pnr_logpmf(k.ravel().astype(float), q)
    return _posterior_from_logs(logt, q, prior, k.shape)


def _posterior_from_logs(logt, q, prior, shape):
    mx = logt.max(axis=0)
    bad = ~np.isfinite(mx)
    mx = np.where(bad, 0.0, mx)
    t = np.exp(logt - mx)
    den = t.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = (q @ t) / den
    bad |= ~(den > 0)
    mean = np.where(bad, prior.moments().mean, mean)
    if shape == ():
        return Posterior(float(mean[0]), bool(bad[0]))
    return Posterior(mean.reshape(shape), bad.reshape(shape))


def _homodyne_loglike(x, q):
    """``log P(x|q)`` for ``x, q >= 0`` shaped ``(len(q), len(x))``."""
    xq = x[None, :] * q[:, None]
    return -(x[None, :] - q[:, None]) ** 2 + np.log1p(np.exp(-4.0 * xq)) - _LOG_2SQRTPI


def posterior_mean_homodyne(x, prior: Prior, spec: QuadratureSpec | None = None,
                            chunk: int = 4096) -> Posterior:
    """``E[q | x]`` for homodyne outcomes ``x``; even in ``x``."""
    _halfline(prior)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("homodyne outcomes must be finite")
    flat = np.abs(x.ravel())
    q, wp = prior_grid(prior, spec)
    with np.errstate(divide="ignore"):
        logw = np.log(wp)
    means, flags = [], []
    for i in range(0, max(flat.size, 1), chunk):
        part = flat[i:i + chunk]
        if part.size == 0:
            break
        p = _posterior_from_logs(logw[:, None] + _homodyne_loglike(part, q), q, prior, part.shape)
        means.append(p.mean)
        flags.append(p.fallback)
    mean = np.concatenate(means) if means else np.empty(0)
    flag = np.concatenate(flags) if flags else np.empty(0, bool)
    if x.shape == ():
        return Posterior(float(mean[0]), bool(flag[0]))
    return Posterior(mean.reshape(x.shape), flag.reshape(x.shape))


def _homodyne_mse_at(prior, spec, refine):
    q, wp = prior_grid(prior, spec, refine=refine)
    lo, hi = prior.window()
    x_hi = hi + 8.0  # likelihood width is 1/sqrt2; e^-64 beyond this
    panels = math.ceil(x_hi / 0.25) * refine
    x, wx = gauss_legendre_grid(0.0, x_hi, panels, (spec or DEFAULT_SPEC).nodes_per_panel)
    with np.errstate(divide="ignore"):
        logt = np.log(wp)[:, None] + _homodyne_loglike(x, q)
    mx = logt.max(axis=0)
    t = np.exp(logt - mx)
    den = t.sum(axis=0)
    num = q @ t
    # N^2/D = exp(mx) (sum t q)^2 / sum t
    ratio = np.exp(mx) * num * num / den
    return float(np.dot(wp, q * q)) - 2.0 * float(np.dot(wx, ratio))


def mse_homodyne(prior: Prior, spec: QuadratureSpec | None = None, rel_tol: float = 1e-10) -> float:
    """Bayes error of position-quadrature homodyne with the posterior mean.

    Both the prior and outcome grids are refined together until two
    successive estimates agree to ``rel_tol``.
    """
    _halfline(prior)
    value = _homodyne_mse_at(prior, spec, 1)
    refine = 1
    while refine < 16:
        refine *= 2
        new = _homodyne_mse_at(prior, spec, refine)
        if abs(new - value) <= rel_tol * abs(new):
            return new
        value = new
    raise QuadratureError("homodyne MSE did not converge", value, float("nan"))


def mc_mse(measurement: str, prior: Prior, n_samples: int = 1_000_000, seed: int = 0,
           spec: QuadratureSpec | None = None):
    """Monte Carlo estimate of a measurement's Bayes error.

    Draws ``q`` from the prior, simulates an outcome and applies the same
    posterior-mean estimator as the quadrature path.  For homodyne the
    posterior mean is tabulated on a fine grid and interpolated with a
    cubic spline (interpolation error is far below the sampling noise).

    Returns
    -------
    estimate, standard_error : float
    """
    _halfline(prior)
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    rng = np.random.default_rng(seed)
    q = prior.sample(rng, n_samples)
    if measurement == "pnr":
        k = rng.poisson(0.5 * q * q)
        table = posterior_mean_pnr(np.arange(k.max() + 1), prior, spec).mean
        est = table[k]
    elif measurement == "homodyne":
        sign = np.where(rng.random(n_samples) < 0.5, -1.0, 1.0)
        x = np.abs(sign * q + rng.normal(0.0, 1.0 / math.sqrt(2.0), n_samples))
        grid = np.linspace(0.0, x.max() + 0.01, math.ceil((x.max() + 0.01) / 0.005) + 1)
        spline = CubicSpline(grid, posterior_mean_homodyne(grid, prior, spec).mean)
        est = spline(x)
    else:
        raise ValueError(f"unknown measurement {measurement!r}; use 'pnr' or 'homodyne'")
    sq = (est - q) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(n_samples))
