"""Minimum mean square error of Bayesian separation estimation.

For a prior ``P`` on ``q_alpha`` and the state ``rho(q_alpha)`` the operator
moments are ``Gamma_k = int P(q) q^k rho(q) dq``; the optimal estimator ``B``
solves ``Gamma_0 B + B Gamma_0 = 2 Gamma_1`` and the minimum error is
``tr Gamma_2 - tr(B Gamma_1)``.

Numerically every ``Gamma_k`` comes out of a quadrature as
``F^T diag(q^k) F`` with ``F[j] = sqrt(w_j P(q_j)) psi(q_j)``.  Solving the
operator equation through the SVD of ``F`` rather than the eigenvalues of
``Gamma_0`` keeps each term of ``tr(B Gamma_1)`` in the bounded form
``2 s_i^2 s_j^2 X_ij^2 / (s_i^2 + s_j^2)``, so the tiny eigenvalues of a
truncated ``Gamma_0`` never get divided into anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy.special import gammaln, logsumexp

from . import fock
from .fock import FockOperator, SqueezeParams, frame_amplitudes, parity_mask
from .priors import FullGaussianPrior, Prior
from .quadrature import DEFAULT_SPEC, QuadratureSpec, gauss_legendre_grid, halfline_gaussian_moment

__all__ = [
    "GammaTriple",
    "PersonickSolution",
    "CutoffSelection",
    "CutoffNotConverged",
    "prior_grid",
    "build_gamma_numeric",
    "build_gamma_single_source",
    "build_gamma0_analytic",
    "gamma1_elements_analytic",
    "solve_B",
    "mmse_halfgaussian_analytic",
    "mmse_unitary_invariance_check",
    "candidate_frames",
    "auto_cutoff",
]

#: pairs with lam_i + lam_j below this fraction of lam_max are dropped (eigh path only)
DROP_FLOOR = 1e-13


def prior_grid(prior: Prior, spec: QuadratureSpec | None = None, refine: int = 1):
    """Quadrature nodes on the prior's window and the weights ``w_j P(q_j)``."""
    spec = spec or DEFAULT_SPEC
    lo, hi = prior.window()
    width = min(spec.panel_width, prior.scale() / 2.0) / refine
    panels = math.ceil((hi - lo) / width)
    q, w = gauss_legendre_grid(lo, hi, panels, spec.nodes_per_panel)
    return q, w * prior.pdf(q)


@dataclass(frozen=True)
class GammaTriple:
    """``Gamma_0``, ``Gamma_1`` and the scalar ``tr Gamma_2``.

    ``factor``/``nodes`` hold the square-root representation described in
    the module docstring when the triple came from quadrature; ``parity``
    marks the symmetric two-source state, whose moments vanish on entries
    with ``n + m`` odd.  ``frame_r`` records the squeezed frame the
    matrices are expressed in (0 for the plain Fock basis).
    """

    gamma0: FockOperator
    gamma1: FockOperator
    gamma2_trace: float
    factor: np.ndarray | None = field(default=None, repr=False)
    nodes: np.ndarray | None = field(default=None, repr=False)
    parity: bool = False
    frame_r: float = 0.0
    quadrature_error: float = 0.0

    @property
    def cutoff(self) -> int:
        return self.gamma0.cutoff

    @classmethod
    def from_factor(cls, factor, nodes, gamma2_trace, parity, frame_r=0.0, quadrature_error=0.0):
        g0 = factor.T @ factor
        g1 = factor.T @ (nodes[:, None] * factor)
        g0 = 0.5 * (g0 + g0.T)
        g1 = 0.5 * (g1 + g1.T)
        cutoff = factor.shape[1] - 1
        if parity:
            mask = parity_mask(cutoff)
            g0 = np.where(mask, g0, 0.0)
            g1 = np.where(mask, g1, 0.0)
        return cls(FockOperator(g0, cutoff, True), FockOperator(g1, cutoff, True),
                   float(gamma2_trace), factor, nodes, parity, frame_r, quadrature_error)

    def truncate(self, cutoff: int) -> "GammaTriple":
        if cutoff > self.cutoff:
            raise ValueError("cannot truncate to a larger cutoff")
        if self.factor is not None:
            return GammaTriple.from_factor(self.factor[:, : cutoff + 1], self.nodes, self.gamma2_trace,
                                           self.parity, self.frame_r, self.quadrature_error)
        return replace(self, gamma0=self.gamma0.block(cutoff), gamma1=self.gamma1.block(cutoff))

    def conjugate_by(self, U: FockOperator) -> "GammaTriple":
        """Moments of the transformed state ``U^dag rho U``."""
        u = U.entries
        if self.factor is not None:
            keeps_parity = not self.parity or np.all(u[~parity_mask(self.cutoff)] == 0)
            if keeps_parity:
                return GammaTriple.from_factor(self.factor @ u, self.nodes, self.gamma2_trace,
                                               self.parity, float("nan"), self.quadrature_error)
        return GammaTriple(self.gamma0.conjugate_by(U), self.gamma1.conjugate_by(U),
                           self.gamma2_trace, parity=False, frame_r=float("nan"),
                           quadrature_error=self.quadrature_error)


@dataclass(frozen=True)
class PersonickSolution:
    B: FockOperator
    mmse: float
    tr_B_gamma1: float
    estimator_values: np.ndarray = field(repr=False)
    measurement: np.ndarray = field(repr=False)
    dropped_pairs: int = 0
    lyapunov_residual: float = 0.0


def build_gamma_numeric(prior: Prior, cutoff: int, spec: QuadratureSpec | None = None,
                        frame_r: float = 0.0) -> GammaTriple:
    """Quadrature of ``P(q) q^k rho(q)`` entry by entry.

    Half-line priors get the two-source state ``(|a><a| + |-a><-a|)/2``;
    :class:`~bayessep.priors.FullGaussianPrior` gets the single coherent
    state ``|a><a|`` integrated over the whole line.  With ``frame_r != 0``
    the matrices are those of ``U^dag(r) Gamma_k U(r)``, computed from
    displaced squeezed amplitudes rather than by conjugating a truncated
    matrix.  ``tr Gamma_2`` is the quadrature of ``P(q) q^2``.
    """
    spec = spec or DEFAULT_SPEC
    q, wp = prior_grid(prior, spec)
    if np.any(wp < 0):
        raise ValueError("negative quadrature weight")
    psi = frame_amplitudes(q, frame_r, cutoff)
    factor = np.sqrt(wp)[:, None] * psi
    m2 = float(np.dot(wp, q * q))
    # error estimate from the normalisation and m2 at half resolution
    qc, wc = prior_grid(prior, spec, refine=0.5)
    err = max(abs(wp.sum() - wc.sum()), abs(m2 - float(np.dot(wc, qc * qc))))
    return GammaTriple.from_factor(factor, q, m2, parity=prior.halfline, frame_r=frame_r,
                                   quadrature_error=err)


def build_gamma_single_source(sigma: float, cutoff: int, spec: QuadratureSpec | None = None,
                              frame_r: float = 0.0) -> GammaTriple:
    """Moments for one coherent state under a zero-mean Gaussian prior on the line."""
    return build_gamma_numeric(FullGaussianPrior(sigma), cutoff, spec, frame_r)


def _working_dim(cutoff: int, r: float) -> int:
    return 2 * cutoff + 40 + math.ceil(80 * abs(r))


def build_gamma0_analytic(sigma: float, cutoff: int) -> FockOperator:
    """``(1-s) sum_n s^n U(r)|n><n|U^dag(r)`` on the Fock basis.

    The squeezer is built in a larger working space so that the returned
    block does not feel the truncation.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    p = SqueezeParams.from_sigma(sigma)
    W = _working_dim(cutoff, p.r)
    U = fock.squeeze_matrix(p.r, W, check=False).entries
    g0 = (U * p.eigenvalues(W)) @ U.T
    g0 = np.where(parity_mask(W), 0.5 * (g0 + g0.T), 0.0)
    return FockOperator(g0[: cutoff + 1, : cutoff + 1], cutoff, hermitian=True)


def _hermite_scaled(y, c, cutoff):
    """``c^n H_n(y) / sqrt(n!)`` for n = 0..cutoff via the three-term recurrence."""
    out = np.empty((y.size, cutoff + 1))
    out[:, 0] = 1.0
    if cutoff >= 1:
        out[:, 1] = 2.0 * c * y
    for n in range(1, cutoff):
        out[:, n + 1] = (2.0 * c * y * out[:, n] - 2.0 * c * c * math.sqrt(n) * out[:, n - 1]) / math.sqrt(n + 1)
    return out


def _gamma1_params(sigma):
    p = SqueezeParams.from_sigma(sigma)
    t = math.tanh(p.r)
    A = 0.5 * (sigma**-2 + 1.0 - t)
    x = (2.0 * math.sinh(2.0 * p.r)) ** -0.5
    return p, t, A, x


def gamma1_elements_analytic(sigma: float, cutoff: int, method: str = "quadrature",
                             spec: QuadratureSpec | None = None) -> FockOperator:
    """``<n| U^dag(r) Gamma_1 U(r) |m>`` for the half-Gaussian prior.

    Each element is ``[sigma sqrt(2 pi n! m!) cosh r]^-1 (tanh r / 2)^((n+m)/2)
    (I_nm^+ + I_nm^-)`` with ``I_nm^+- = int_0^inf q exp(-A q^2)
    H_n(+-x q) H_m(+-x q) dq``; since ``H_n(-y) = (-1)^n H_n(y)`` the
    odd-``n+m`` elements are exactly zero and the even ones are ``2 I^+``.

    ``method='quadrature'`` integrates the scaled Hermite products
    numerically (stable for any cutoff); ``method='expansion'`` expands
    ``H_n H_m`` in powers and uses exact Gaussian moments, which loses
    digits to cancellation beyond ``n + m ~ 20``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    p, t, A, x = _gamma1_params(sigma)
    pref = 1.0 / (sigma * math.sqrt(2.0 * math.pi) * math.cosh(p.r))
    n = np.arange(cutoff + 1)
    even = parity_mask(cutoff)
    if method == "quadrature":
        spec = spec or DEFAULT_SPEC
        width = 1.0 / math.sqrt(2.0 * A)
        hi = math.sqrt((2 * cutoff + 1) / (2.0 * A)) + 12.0 * width
        panels = math.ceil(hi / min(spec.panel_width, width / 2.0))
        q, w = gauss_legendre_grid(0.0, hi, panels, spec.nodes_per_panel)
        h = _hermite_scaled(x * q, math.sqrt(t / 2.0), cutoff)
        weight = w * q * np.exp(-A * q * q)
        M = 2.0 * (h.T @ (weight[:, None] * h))
    elif method == "expansion":
        M = np.zeros((cutoff + 1, cutoff + 1))
        log_c = 0.5 * math.log(t / 2.0)
        for i in range(cutoff + 1):
            for j in range(i, cutoff + 1, 2):
                coeffs = _herm.herm2poly(_herm.hermmul(np.eye(i + 1)[i], np.eye(j + 1)[j]))
                total = sum(cj * x**k * halfline_gaussian_moment(k, A)
                            for k, cj in enumerate(coeffs) if cj != 0.0)
                scale = math.exp((i + j) * log_c - 0.5 * (gammaln(i + 1) + gammaln(j + 1)))
                M[i, j] = M[j, i] = 2.0 * total * scale
    else:
        raise ValueError(f"unknown method {method!r}")
    M = np.where(even, 0.5 * (M + M.T), 0.0) * pref
    return FockOperator(M, cutoff, hermitian=True)


def _solve_block_factor(F, q):
    """Return (B block, tr(B Gamma_1) contribution, dropped pair count)."""
    if F.shape[1] == 0:
        return np.zeros((0, 0)), 0.0, 0
    U, s, Vt = np.linalg.svd(F, full_matrices=False)
    X = U.T @ (q[:, None] * U)
    s2 = s * s
    den = s2[:, None] + s2[None, :]
    ok = den > 0
    ratio = np.where(ok, np.outer(s, s) / np.where(ok, den, 1.0), 0.0)
    Bp = 2.0 * ratio * X
    tr = float(np.sum(Bp * np.outer(s, s) * X))
    return Vt.T @ Bp @ Vt, tr, int(np.count_nonzero(~ok))


def _solve_block_eigh(g0, g1):
    lam, V = np.linalg.eigh(g0)
    g = V.T @ g1 @ V
    den = lam[:, None] + lam[None, :]
    ok = den > DROP_FLOOR * max(lam.max(initial=0.0), 0.0)
    Bp = np.where(ok, 2.0 * g / np.where(ok, den, 1.0), 0.0)
    return V @ Bp @ V.T, float(np.sum(Bp * g)), int(np.count_nonzero(~ok))


def solve_B(gammas: GammaTriple) -> PersonickSolution:
    """Optimal estimator operator and the minimum mean square error.

    The two-source parity blocks are solved separately, so ``B`` has exact
    zeros wherever ``n + m`` is odd.  Without a quadrature factor the
    solve falls back to the eigenbasis of ``Gamma_0`` and drops pairs with
    ``lam_i + lam_j < 1e-13 lam_max``.
    """
    D = gammas.cutoff + 1
    idx_all = np.arange(D)
    blocks = [idx_all[0::2], idx_all[1::2]] if gammas.parity else [idx_all]
    B = np.zeros((D, D))
    tr = 0.0
    dropped = 0
    g0 = gammas.gamma0.entries
    g1 = gammas.gamma1.entries
    for idx in blocks:
        if gammas.factor is not None:
            Bb, t, d = _solve_block_factor(gammas.factor[:, idx], gammas.nodes)
        else:
            Bb, t, d = _solve_block_eigh(g0[np.ix_(idx, idx)], g1[np.ix_(idx, idx)])
        B[np.ix_(idx, idx)] = 0.5 * (Bb + Bb.T)
        tr += t
        dropped += d
    resid = float(np.abs(g0 @ B + B @ g0 - 2.0 * g1).max())
    values, vectors = np.linalg.eigh(B)
    return PersonickSolution(
        B=FockOperator(B, gammas.cutoff, hermitian=True),
        mmse=gammas.gamma2_trace - tr,
        tr_B_gamma1=tr,
        estimator_values=values,
        measurement=vectors,
        dropped_pairs=dropped,
        lyapunov_residual=resid,
    )


def mmse_halfgaussian_analytic(sigma: float, cutoff: int, method: str = "quadrature") -> float:
    """``sigma^2 - (2/(1-s)) sum_{n,m<=cutoff} M_nm^2 / (s^n + s^m)`` with
    ``M`` from :func:`gamma1_elements_analytic`.

    Summed in log space, so the geometric weights may underflow freely.
    """
    p = SqueezeParams.from_sigma(sigma)
    M = gamma1_elements_analytic(sigma, cutoff, method).entries
    n = np.arange(cutoff + 1)
    log_s = math.log(p.s)
    lo = np.minimum(n[:, None], n[None, :])
    gap = np.abs(n[:, None] - n[None, :])
    log_den = lo * log_s + np.log1p(np.exp(gap * log_s))
    with np.errstate(divide="ignore"):
        log_terms = 2.0 * np.log(np.abs(M)) - log_den
    total = math.exp(logsumexp(log_terms)) if np.isfinite(log_terms).any() else 0.0
    return sigma**2 - 2.0 / (1.0 - p.s) * total


def mmse_unitary_invariance_check(gammas: GammaTriple, r_test: float):
    """MMSE before and after conjugating the moments by the squeezer ``U(r_test)``."""
    if abs(r_test) > 1:
        raise ValueError("|r_test| must be <= 1")
    U = fock.squeeze_matrix(r_test, gammas.cutoff, check=False)
    before = solve_B(gammas).mmse
    after = solve_B(gammas.conjugate_by(U)).mmse
    return before, after


def candidate_frames(prior: Prior) -> list[float]:
    """Squeezed frames worth trying for ``prior``.

    The variance- and second-moment-matched frames ``r = ln(2 v + 1)/4``
    come first, then a coarse grid ``0, 0.2, ..., 1`` that covers the
    cases where neither is the fastest.
    """
    m = prior.moments()
    out = []
    for r in [0.25 * math.log(2.0 * m.variance + 1.0), 0.25 * math.log(2.0 * m.m2 + 1.0),
              0.0, 0.2, 0.4, 0.6, 0.8, 1.0]:
        if all(abs(r - o) > 0.05 for o in out):
            out.append(r)
    return out


class CutoffNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class CutoffSelection:
    cutoff: int
    frame_r: float
    mmse: float
    mmse_doubled: float
    solution: PersonickSolution = field(repr=False)
    history: tuple = field(default=(), repr=False)

    @property
    def rel_change(self) -> float:
        return abs(self.mmse - self.mmse_doubled) / abs(self.mmse_doubled)


def _ladder(prior, frame_r, spec, rel_tol, start, max_cutoff):
    """Double the cutoff in one frame until the MMSE settles."""
    cache = {}
    history = []

    def solve(N):
        if N not in cache:
            cache[N] = solve_B(build_gamma_numeric(prior, N, spec, frame_r))
        return cache[N]

    N = start
    while 2 * N <= max_cutoff:
        a, b = solve(N), solve(2 * N)
        history.append((N, a.mmse))
        if abs(a.mmse - b.mmse) <= rel_tol * abs(b.mmse):
            return CutoffSelection(N, frame_r, a.mmse, b.mmse, a, tuple(history))
        N *= 2
    return None


def auto_cutoff(prior: Prior, rel_tol: float = 1e-6, frames: Sequence[float] | None = None,
                start: int = 8, max_cutoff: int = 512,
                spec: QuadratureSpec | None = None) -> CutoffSelection:
    """Smallest cutoff on the ladder ``start * 2^k`` whose MMSE changes by less
    than ``rel_tol`` (relative) when the cutoff is doubled.

    The MMSE does not depend on the basis, but the truncation error does;
    each frame in ``frames`` (default :func:`candidate_frames`) is tried and
    the one converging at the lowest cutoff wins.  Frames that tie on the
    cutoff are ranked by how little the doubling changed the MMSE.
    """
    frames = candidate_frames(prior) if frames is None else list(frames)
    best = None
    for r in frames:
        limit = max_cutoff if best is None else best.cutoff
        sel = _ladder(prior, r, spec, rel_tol, start, 2 * limit)
        if sel is None:
            continue
        if best is None or (sel.cutoff, sel.rel_change) < (best.cutoff, best.rel_change):
            best = sel
    if best is None:
        raise CutoffNotConverged(f"MMSE not converged below cutoff {max_cutoff} for {prior!r}")
    return best
