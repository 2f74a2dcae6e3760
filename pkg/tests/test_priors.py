import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from bayessep.priors import (
    DisplacedHalfGaussianPrior,
    FullGaussianPrior,
    HalfGaussianPrior,
    UnreachableMoments,
    _standard_truncated,
    half_gaussian_ratio,
    invert_moments,
)


def _quad_moments(mu, sigma):
    """Independent oracle: adaptive quadrature of the density scaled to peak 1.

    Returns log normalisation, mean and variance.
    """
    c = max(mu, 0.0)
    shift = (c - mu) ** 2 / (2 * sigma**2)
    width = 40 * sigma if mu >= 0 else min(40 * sigma, 800 * sigma**2 / -mu)
    f = lambda q, k: q**k * math.exp(shift - 0.5 * ((q - mu) / sigma) ** 2)
    z = [sp_integrate.quad(f, c, c + width, args=(k,), epsabs=0, epsrel=1e-13, limit=400)[0]
         + (sp_integrate.quad(f, 0, c, args=(k,), epsabs=0, epsrel=1e-13, limit=400)[0] if c > 0 else 0.0)
         for k in range(3)]
    mean = z[1] / z[0]
    return math.log(z[0]) - shift, mean, z[2] / z[0] - mean**2


class TestHalfGaussian:
    def test_moments(self):
        m = HalfGaussianPrior(2.0).moments()
        assert m.mean == pytest.approx(2.0 * math.sqrt(2 / math.pi))
        assert m.variance == pytest.approx(4.0 * (1 - 2 / math.pi))
        assert m.m2 == 4.0

    def test_is_displaced_at_zero(self):
        a = HalfGaussianPrior(1.3)
        b = DisplacedHalfGaussianPrior(0.0, 1.3)
        q = np.linspace(0, 5, 11)
        np.testing.assert_allclose(a.pdf(q), b.pdf(q), rtol=1e-14)
        np.testing.assert_allclose(a.moments(), b.moments(), rtol=1e-14)

    def test_pdf_rejects_negative(self):
        with pytest.raises(ValueError):
            HalfGaussianPrior(1.0).pdf([-0.1])

    @pytest.mark.parametrize("sigma", [0.0, -1.0, float("inf"), float("nan")])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ValueError):
            HalfGaussianPrior(sigma)


class TestDisplaced:
    @settings(max_examples=60, deadline=None)
    @given(mu=st.floats(-2, 5), sigma=st.floats(0.05, 3))
    def test_moments_against_quadrature(self, mu, sigma):
        p = DisplacedHalfGaussianPrior(mu, sigma)
        logz, mean, var = _quad_moments(mu, sigma)
        assert p.log_normalization == pytest.approx(logz, abs=1e-10)
        assert p.moments().mean == pytest.approx(mean, rel=1e-10)
        assert p.moments().variance == pytest.approx(var, rel=1e-9)

    @pytest.mark.parametrize("mu,sigma", [(1.0, 0.5), (-1.0, 1.0), (-6.0, 1.0)])
    def test_pdf_integrates_to_one(self, mu, sigma):
        p = DisplacedHalfGaussianPrior(mu, sigma)
        val, _ = sp_integrate.quad(lambda q: float(p.pdf(q)), 0, max(mu, 0) + 40 * sigma,
                                   epsrel=1e-12, points=[max(mu, 0)])
        assert val == pytest.approx(1.0, rel=1e-10)

    def test_far_negative_mean_is_exponential_limit(self):
        # mu -> -inf: the density tends to Exp(rate=-mu/sigma^2), mean = std
        p = DisplacedHalfGaussianPrior(-1e3, 1.0)
        m = p.moments()
        assert m.mean == pytest.approx(1e-3, rel=1e-5)
        assert math.sqrt(m.variance) == pytest.approx(m.mean, rel=1e-5)

    def test_continued_fraction_branch_continuous(self):
        zs = np.linspace(-8, -3, 41)
        for z in zs:
            mean, var = _standard_truncated(z)
            lam = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (0.5 * math.erfc(-z / math.sqrt(2)))
            assert mean == pytest.approx(z + lam, rel=1e-9)
            assert var == pytest.approx(1 - lam * (z + lam), rel=1e-6)

    def test_sampling_matches_moments(self):
        rng = np.random.default_rng(42)
        p = DisplacedHalfGaussianPrior(0.5, 1.2)
        x = p.sample(rng, 200_000)
        m = p.moments()
        assert np.all(x >= 0)
        assert x.mean() == pytest.approx(m.mean, abs=5 * math.sqrt(m.variance / x.size))


class TestFullGaussian:
    def test_flags(self):
        p = FullGaussianPrior(2.0)
        assert not p.halfline
        assert p.moments().m2 == 4.0
        assert p.window() == (-24.0, 24.0)


class TestInversion:
    @settings(max_examples=60, deadline=None)
    @given(mu=st.floats(-2, 5), sigma=st.floats(0.05, 3))
    def test_round_trip(self, mu, sigma):
        m = DisplacedHalfGaussianPrior(mu, sigma).moments()
        mu2, sigma2 = invert_moments(m.mean, m.variance)
        got = DisplacedHalfGaussianPrior(mu2, sigma2).moments()
        assert got.mean == pytest.approx(m.mean, rel=1e-9)
        assert got.variance == pytest.approx(m.variance, rel=1e-8)

    def test_narrow_prior_recovers_gaussian(self):
        mu, sigma = invert_moments(3.0, 0.01)
        assert mu == pytest.approx(3.0, abs=1e-9)
        assert sigma == pytest.approx(0.1, abs=1e-9)

    def test_wide_prior_needs_negative_mu(self):
        mu, sigma = invert_moments(1.0, 0.9)
        assert mu < 0
        m = DisplacedHalfGaussianPrior(mu, sigma).moments()
        assert (m.mean, m.variance) == pytest.approx((1.0, 0.9), rel=1e-9)

    def test_half_gaussian_ratio_gives_mu_zero(self):
        # the sigma=1 half-Gaussian has mean sqrt(2/pi) and variance 1 - 2/pi
        assert half_gaussian_ratio() == pytest.approx(math.sqrt(2 / math.pi) / math.sqrt(1 - 2 / math.pi))
        mu, sigma = invert_moments(math.sqrt(2 / math.pi), 1 - 2 / math.pi)
        assert mu == pytest.approx(0.0, abs=1e-9)
        assert sigma == pytest.approx(1.0, rel=1e-9)

    def test_unreachable(self):
        # mean/std below 1 cannot be produced by any member of the family
        with pytest.raises(UnreachableMoments) as info:
            invert_moments(0.2, 0.05)
        assert info.value.residual > 0

    def test_non_positive_targets(self):
        with pytest.raises(ValueError):
            invert_moments(0.0, 1.0)
