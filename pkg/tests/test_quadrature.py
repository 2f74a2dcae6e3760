import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from bayessep.quadrature import (
    QuadratureError,
    QuadratureSpec,
    gauss_legendre_grid,
    gaussian_cut,
    halfline_gaussian_moment,
    integrate,
)


class TestGrid:
    def test_polynomials_exact_per_panel(self):
        x, w = gauss_legendre_grid(-1.0, 3.0, 4, 5)
        for k in range(10):
            exact = (3.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
            assert np.dot(w, x**k) == pytest.approx(exact, rel=1e-13)

    def test_nodes_inside_interval(self):
        x, w = gauss_legendre_grid(0.0, 2.0, 7, 20)
        assert x.min() > 0 and x.max() < 2
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(2.0, rel=1e-14)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            gauss_legendre_grid(1.0, 1.0, 3)


class TestIntegrate:
    def test_gaussian_on_finite_window(self):
        val, err = integrate(lambda q: np.exp(-q * q), (0.0, 12.0))
        assert val == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-13)
        assert err < 1e-10

    def test_infinite_domain_needs_cut(self):
        with pytest.raises(ValueError):
            integrate(lambda q: np.exp(-q * q), (0.0, math.inf))

    def test_infinite_domain_with_cut(self):
        spec = QuadratureSpec(domain_cut=3.0)
        val, _ = integrate(lambda q: np.exp(-q * q), (-math.inf, math.inf), spec)
        assert val == pytest.approx(math.sqrt(math.pi), rel=1e-12)

    def test_adaptive_rule_matches(self):
        f = lambda q: q**3 * np.exp(-0.7 * q * q)
        a, _ = integrate(f, (0.0, 15.0))
        b, _ = integrate(f, (0.0, 15.0), QuadratureSpec(rule="adaptive"))
        assert a == pytest.approx(b, rel=1e-11)

    def test_nonconvergence_raises_with_estimate(self):
        spec = QuadratureSpec(max_panels=4, rel_tol=1e-15)
        with pytest.raises(QuadratureError) as info:
            integrate(lambda q: np.sin(200 * q) ** 2, (0.0, 10.0), spec)
        assert math.isfinite(info.value.estimate)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            QuadratureSpec(rule="simpson")
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=0)


class TestHalflineMoment:
    @pytest.mark.parametrize("k", [0, 1, 2, 5, 12])
    @pytest.mark.parametrize("A", [0.3, 1.0, 4.0])
    def test_against_quad(self, k, A):
        ref, _ = sp_integrate.quad(lambda q: q ** (k + 1) * math.exp(-A * q * q), 0, math.inf, epsrel=1e-13)
        assert halfline_gaussian_moment(k, A) == pytest.approx(ref, rel=1e-11)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            halfline_gaussian_moment(1, 0.0)
        with pytest.raises(ValueError):
            halfline_gaussian_moment(-1, 1.0)


class TestCut:
    def test_symmetric_full_line(self):
        assert gaussian_cut(1.0, 2.0, lower=None) == (-23.0, 25.0)

    def test_halfline_clipped_at_zero(self):
        lo, hi = gaussian_cut(1.0, 1.0)
        assert lo == 0.0 and hi == 13.0

    def test_negative_mean_shrinks(self):
        lo, hi = gaussian_cut(-20.0, 2.0)
        # density ~ exp(-q * 20 / 4) on q >= 0
        assert lo == 0.0
        assert hi == pytest.approx(72 * 4 / 20)
