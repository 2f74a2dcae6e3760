"""Prior densities on the separation parameter ``q_alpha``.

Two half-line families are supported, the half-Gaussian and the displaced
half-Gaussian (a normal density of location ``mu`` and scale ``sigma``
truncated to ``q >= 0``), plus the zero-mean full-line Gaussian used by the
single-source reference problem.

The moments are written in terms of the inverse Mills ratio
``lam(z) = phi(z) / Phi(z)``, ``z = mu / sigma``:

    mean     = mu + sigma * lam
    variance = sigma^2 * (1 - z * lam - lam^2)

which is the familiar ``G``/``Erf``/``Erfc`` expression rearranged so that it
stays accurate when ``mu`` is many ``sigma`` below zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import optimize, stats
from scipy.special import log_ndtr

from .quadrature import gaussian_cut

__all__ = [
    "Moments",
    "HalfGaussianPrior",
    "DisplacedHalfGaussianPrior",
    "FullGaussianPrior",
    "Prior",
    "UnreachableMoments",
    "pdf",
    "moments",
    "invert_moments",
    "half_gaussian_ratio",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Moments(NamedTuple):
    mean: float
    variance: float
    m2: float


class UnreachableMoments(ValueError):
    """No displaced half-Gaussian has the requested mean and variance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def _inv_mills(z: float) -> float:
    """``phi(z) / Phi(z)`` evaluated in log space."""
    return math.exp(-0.5 * z * z - _LOG_SQRT_2PI - float(log_ndtr(z)))


_CF_SWITCH = -5.0
_CF_TERMS = 200


def _standard_truncated(z: float):
    """Mean and variance of a unit normal centred at ``z`` truncated to ``x >= 0``.

    For ``z`` well below zero both quantities are differences of nearly equal
    numbers; there the continued fraction ``lam = a + 1/(a + 2/(a + 3/...))``,
    ``a = -z``, gives ``z + lam`` and the variance without cancellation.
    """
    if z >= _CF_SWITCH:
        lam = _inv_mills(z)
        return z + lam, 1.0 - lam * (z + lam)
    a = -z
    t = 0.0
    k3 = 0.0
    for k in range(_CF_TERMS, 1, -1):
        t = k / (a + t)
        if k == 3:
            k3 = t
    delta = 1.0 / (a + t)  # z + lam
    # 1 - lam*delta = delta * (2/(a + k3) - delta)
    return delta, delta * (2.0 / (a + k3) - delta)


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma!r}")


def _check_halfline(q):
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("half-line prior evaluated at negative q_alpha")
    return q


@dataclass(frozen=True)
class DisplacedHalfGaussianPrior:
    """``P(q) = exp(-(q - mu)^2 / 2 sigma^2) / G`` on ``q >= 0``."""

    mu: float
    sigma: float

    kind = "displaced"
    halfline = True

    def __post_init__(self):
        _check_sigma(self.sigma)
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")

    @property
    def log_normalization(self) -> float:
        # G = sqrt(pi/2) sigma (1 + erf(mu / sqrt2 sigma)) = sqrt(2 pi) sigma Phi(mu/sigma)
        return _LOG_SQRT_2PI + math.log(self.sigma) + float(log_ndtr(self.mu / self.sigma))

    @property
    def normalization(self) -> float:
        return math.exp(self.log_normalization)

    def pdf(self, q):
        q = _check_halfline(q)
        return np.exp(-0.5 * ((q - self.mu) / self.sigma) ** 2 - self.log_normalization)

    def moments(self) -> Moments:
        m, v = _standard_truncated(self.mu / self.sigma)
        mean = self.sigma * m
        var = self.sigma**2 * v
        return Moments(mean, var, var + mean * mean)

    def window(self):
        """Finite integration window for quadrature."""
        return gaussian_cut(self.mu, self.sigma, lower=0.0)

    def scale(self) -> float:
        """Shortest length over which the density changes appreciably."""
        if self.mu < 0:
            return min(self.sigma, self.sigma**2 / -self.mu)
        return self.sigma

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        a = -self.mu / self.sigma
        return stats.truncnorm.rvs(a, np.inf, loc=self.mu, scale=self.sigma,
                                   size=size, random_state=rng)


class HalfGaussianPrior(DisplacedHalfGaussianPrior):
    """``P(q) = 2 / (sigma sqrt(2 pi)) exp(-q^2 / 2 sigma^2)`` on ``q >= 0``."""

    kind = "half-gaussian"

    def __init__(self, sigma: float):
        object.__setattr__(self, "mu", 0.0)
        object.__setattr__(self, "sigma", float(sigma))
        self.__post_init__()

    def __repr__(self):
        return f"HalfGaussianPrior(sigma={self.sigma!r})"

    def moments(self) -> Moments:
        s = self.sigma
        mean = s * math.sqrt(2.0 / math.pi)
        return Moments(mean, s * s * (1.0 - 2.0 / math.pi), s * s)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.abs(rng.normal(0.0, self.sigma, size))


@dataclass(frozen=True)
class FullGaussianPrior:
    """Zero-mean Gaussian on the whole real line (single-source problem)."""

    sigma: float

    kind = "full-gaussian"
    halfline = False
    mu = 0.0

    def __post_init__(self):
        _check_sigma(self.sigma)

    def pdf(self, q):
        q = np.asarray(q, dtype=float)
        return np.exp(-0.5 * (q / self.sigma) ** 2 - _LOG_SQRT_2PI) / self.sigma

    def moments(self) -> Moments:
        return Moments(0.0, self.sigma**2, self.sigma**2)

    def window(self):
        return gaussian_cut(0.0, self.sigma, lower=None)

    def scale(self) -> float:
        return self.sigma

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size)


Prior = Union[HalfGaussianPrior, DisplacedHalfGaussianPrior, FullGaussianPrior]


def pdf(prior: Prior, q_alpha):
    return prior.pdf(q_alpha)


def moments(prior: Prior) -> Moments:
    return prior.moments()


def half_gaussian_ratio() -> float:
    """``mean / std`` of every half-Gaussian, the ``mu = 0`` member of the family."""
    return math.sqrt(2.0 / math.pi) / math.sqrt(1.0 - 2.0 / math.pi)


def _ratio(z: float) -> float:
    m, v = _standard_truncated(z)
    return m / math.sqrt(v)


# mean/std of the family tends to 1 (exponential limit) as mu/sigma -> -inf
_Z_FLOOR = -1.0e4


def invert_moments(target_mu_t: float, target_sigma_t2: float, tol: float = 1e-8):
    """Find ``(mu, sigma)`` whose displaced half-Gaussian has the given mean
    and variance.

    The ratio ``mean / std`` depends on ``z = mu / sigma`` alone and is
    monotone in it, so the problem reduces to a bracketed 1-D root in ``z``
    followed by a closed-form rescaling.  ``mu`` may come out negative.

    Raises
    ------
    UnreachableMoments
        When ``mean / std <= 1`` (no member of the family is that wide) or the
        round-trip residual exceeds ``tol``.
    """
    if not (target_mu_t > 0 and target_sigma_t2 > 0):
        raise ValueError("targets must be positive")
    std = math.sqrt(target_sigma_t2)
    want = target_mu_t / std
    lo_ratio = _ratio(_Z_FLOOR)
    if want <= lo_ratio:
        raise UnreachableMoments(
            f"mean/std = {want:.6g} is not attainable (family infimum is 1)",
            residual=lo_ratio - want)
    f = lambda z: _ratio(z) - want
    hi = max(2.0 * want + 10.0, 10.0)
    lo = -1.0
    while f(lo) > 0:
        lo = max(lo * 2.0, _Z_FLOOR)
    z = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    sigma = std / math.sqrt(_standard_truncated(z)[1])
    mu = z * sigma
    got = DisplacedHalfGaussianPrior(mu, sigma).moments()
    residual = max(abs(got.mean - target_mu_t), abs(got.variance - target_sigma_t2))
    if residual > tol * max(1.0, target_mu_t, target_sigma_t2):
        raise UnreachableMoments(
            f"inversion residual {residual:.3e} exceeds {tol:g}", residual=residual)
    return mu, sigma
