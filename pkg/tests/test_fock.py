import math

import numpy as np
import pytest
from scipy.linalg import expm

from bayessep.fock import (
    FockOperator,
    FockVector,
    SqueezeParams,
    annihilation,
    coherent_vector,
    eigh,
    frame_amplitudes,
    heisenberg_residual,
    interior_size,
    parity_mask,
    rho_two_source,
    squeeze_matrix,
)


class TestCoherent:
    def test_vacuum(self):
        c = coherent_vector(0.0, 5).amplitudes
        np.testing.assert_array_equal(c, [1, 0, 0, 0, 0, 0])

    @pytest.mark.parametrize("q", [0.3, 1.0, 2.5])
    def test_normalised_and_eigenvector(self, q):
        v = coherent_vector(q, 60)
        assert v.tail_mass < 1e-14
        a = annihilation(60).entries
        alpha = q / math.sqrt(2)
        c = v.amplitudes
        np.testing.assert_allclose((a @ c)[:50], alpha * c[:50], atol=1e-14)

    def test_negative_amplitude_alternates(self):
        p, m = coherent_vector(1.2, 8).amplitudes, coherent_vector(-1.2, 8).amplitudes
        np.testing.assert_allclose(m, p * (-1.0) ** np.arange(9))

    def test_large_n_no_overflow(self):
        c = coherent_vector(30.0, 2000).amplitudes
        assert np.all(np.isfinite(c))
        assert abs(np.sum(c * c) - 1) < 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            coherent_vector(float("nan"), 4)

    def test_readonly(self):
        with pytest.raises(ValueError):
            coherent_vector(1.0, 3).amplitudes[0] = 2.0


class TestOperators:
    def test_hermitian_flag_checked(self):
        with pytest.raises(ValueError):
            FockOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), 1, hermitian=True)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            FockOperator(np.eye(3), 3)

    def test_eigh_requires_hermitian(self):
        with pytest.raises(ValueError):
            eigh(annihilation(3))

    def test_two_source_parity_and_trace(self):
        rho = rho_two_source(1.5, 40)
        assert rho.trace() == pytest.approx(1.0, abs=1e-12)
        assert np.all(rho.entries[~parity_mask(40)] == 0.0)
        c = coherent_vector(1.5, 40).amplitudes
        m = coherent_vector(-1.5, 40).amplitudes
        np.testing.assert_allclose(rho.entries, 0.5 * (np.outer(c, c) + np.outer(m, m)), atol=1e-15)

    def test_two_source_rejects_negative(self):
        with pytest.raises(ValueError):
            rho_two_source(-0.1, 4)


class TestSqueeze:
    def test_zero_is_identity(self):
        np.testing.assert_allclose(squeeze_matrix(0.0, 10).entries, np.eye(11), atol=1e-15)

    def test_orthogonal(self):
        U = squeeze_matrix(0.7, 40, check=False).entries
        np.testing.assert_allclose(U.T @ U, np.eye(41), atol=1e-12)

    @pytest.mark.parametrize("r", [0.3, 0.549, 1.0])
    def test_heisenberg_on_interior(self, r):
        assert heisenberg_residual(r, 200) < 1e-8

    def test_convention_sign(self):
        # U a U^dag = a cosh r - a^dag sinh r; with U^dag a U the sign flips
        r, N = 0.4, 120
        U = squeeze_matrix(r, N, check=False).entries
        a = annihilation(N).entries
        k = interior_size(r, N)
        lhs = (U.T @ a @ U)[:k, :k]
        rhs = (a * math.cosh(r) + a.T * math.sinh(r))[:k, :k]
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)

    def test_too_large_rejected(self):
        with pytest.raises(ValueError):
            squeeze_matrix(5.5, 10)

    def test_warns_when_truncation_too_coarse(self):
        with pytest.warns(UserWarning):
            squeeze_matrix(2.0, 30)

    def test_squeezed_thermal_params(self):
        p = SqueezeParams.from_sigma(1.0)
        assert p.r == pytest.approx(0.25 * math.log(3))
        assert p.n_bar == pytest.approx((math.sqrt(3) - 1) / 2)
        assert p.s == pytest.approx(p.n_bar / (p.n_bar + 1))
        assert p.eigenvalues(400).sum() == pytest.approx(1.0, abs=1e-14)


class TestFrameAmplitudes:
    def test_r_zero_is_coherent(self):
        q = np.array([0.0, 0.4, 2.0, 5.0])
        amps = frame_amplitudes(q, 0.0, 50)
        for qi, row in zip(q, amps):
            np.testing.assert_allclose(row, coherent_vector(qi, 50).amplitudes, atol=1e-15)

    @pytest.mark.parametrize("r", [0.2, 0.6])
    def test_matches_expm_squeezer(self, r):
        N = 300
        U = expm(0.5 * r * (annihilation(N).entries.T @ annihilation(N).entries.T
                            - annihilation(N).entries @ annihilation(N).entries))
        for q in (0.0, 0.8, 2.3):
            ref = U.T @ coherent_vector(q, N).amplitudes
            np.testing.assert_allclose(frame_amplitudes(np.array([q]), r, 30)[0], ref[:31], atol=1e-12)

    def test_huge_cutoff_finite(self):
        amps = frame_amplitudes(np.array([40.0]), 0.5, 3000)
        assert np.all(np.isfinite(amps))
        assert abs(np.sum(amps**2) - 1) < 1e-10
