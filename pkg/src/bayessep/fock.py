"""Truncated single-mode Fock space.

States and operators live on ``{|0>, ..., |cutoff>}``.  Every state used in
the package has real amplitudes, so the numeric kernel is real symmetric.

Squeezing convention: ``U(r) = exp(r/2 (a^dag^2 - a^2))`` so that
``U a U^dag = a cosh r - a^dag sinh r`` and ``U^dag a U = a cosh r + a^dag sinh r``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

__all__ = [
    "FockVector",
    "FockOperator",
    "SqueezeParams",
    "coherent_vector",
    "rho_two_source",
    "annihilation",
    "squeeze_matrix",
    "heisenberg_residual",
    "interior_size",
    "eigh",
    "frame_amplitudes",
    "parity_mask",
]

HERMITIAN_TOL = 1e-12
SQUEEZE_TOL = 1e-8
MAX_SQUEEZE = 5.0


def _check_cutoff(cutoff):
    if int(cutoff) != cutoff or cutoff < 0:
        raise ValueError(f"cutoff must be a non-negative integer, got {cutoff!r}")
    return int(cutoff)


@dataclass(frozen=True)
class FockVector:
    amplitudes: np.ndarray
    cutoff: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (self.cutoff + 1,):
            raise ValueError("amplitudes must have length cutoff + 1")

    @property
    def tail_mass(self) -> float:
        """Probability lost to truncation, ``1 - sum |c_n|^2``."""
        return float(1.0 - np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class FockOperator:
    """Square matrix on the truncated space.

    When ``hermitian`` is set the matrix is checked against its adjoint
    (``max|M - M^dag| <= 1e-12`` relative to ``max(1, max|M|)``).
    """

    entries: np.ndarray
    cutoff: int
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.entries, copy=True)
        n = _check_cutoff(self.cutoff) + 1
        if m.shape != (n, n):
            raise ValueError(f"entries must be {n}x{n}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        if self.hermitian:
            scale = max(1.0, float(np.abs(m).max(initial=0.0)))
            if np.abs(m - m.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
                raise ValueError("operator flagged hermitian is not")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def conjugate_by(self, U: "FockOperator") -> "FockOperator":
        """Return ``U^dag M U``."""
        u = U.entries
        return FockOperator(_symmetrize(u.conj().T @ self.entries @ u) if self.hermitian
                            else u.conj().T @ self.entries @ u, self.cutoff, self.hermitian)

    def block(self, cutoff: int) -> "FockOperator":
        """Leading ``(cutoff+1)``-square block."""
        return FockOperator(self.entries[: cutoff + 1, : cutoff + 1], cutoff, self.hermitian)


def _symmetrize(m):
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing ``r``, thermal occupation ``n_bar`` and ratio ``s = n_bar/(n_bar+1)``
    of the squeezed thermal state produced by a zero-mean Gaussian spread of
    coherent amplitudes with position variance ``sigma^2``."""

    r: float
    n_bar: float
    s: float
    sigma: float = field(default=float("nan"))

    @classmethod
    def from_sigma(cls, sigma: float) -> "SqueezeParams":
        if not sigma >= 0:
            raise ValueError("sigma must be non-negative")
        g = 2.0 * sigma**2 + 1.0
        r = 0.25 * math.log(g)
        root = math.sqrt(g)
        n_bar = 0.5 * (root - 1.0)
        # n_bar/(n_bar+1) without cancellation for small sigma
        s = (root - 1.0) / (root + 1.0)
        return cls(r=r, n_bar=n_bar, s=s, sigma=float(sigma))

    def eigenvalues(self, cutoff: int) -> np.ndarray:
        """Geometric spectrum ``(1-s) s^n`` of the squeezed thermal state."""
        n = np.arange(cutoff + 1)
        with np.errstate(under="ignore"):
            return (1.0 - self.s) * self.s**n


def coherent_vector(q_alpha: float, cutoff: int) -> FockVector:
    """Fock amplitudes of ``|alpha>`` with ``alpha = q_alpha / sqrt(2)``."""
    if not np.isfinite(q_alpha):
        raise ValueError("q_alpha must be finite")
    cutoff = _check_cutoff(cutoff)
    alpha = q_alpha / math.sqrt(2.0)
    n = np.arange(cutoff + 1)
    if alpha == 0.0:
        amps = (n == 0).astype(float)
    else:
        logs = -0.5 * alpha**2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        with np.errstate(under="ignore"):
            amps = np.exp(logs)
        if alpha < 0:
            amps = amps * (-1.0) ** n
    return FockVector(amps, cutoff)


def parity_mask(cutoff: int) -> np.ndarray:
    """Boolean matrix, True where ``n + m`` is even."""
    n = np.arange(cutoff + 1)
    return (n[:, None] + n[None, :]) % 2 == 0


def rho_two_source(q_alpha: float, cutoff: int) -> FockOperator:
    """``(|alpha><alpha| + |-alpha><-alpha|)/2``; odd-parity entries are set to 0
    exactly since the two terms cancel there."""
    if not q_alpha >= 0:
        raise ValueError("q_alpha must be non-negative")
    c = coherent_vector(q_alpha, cutoff).amplitudes
    rho = np.where(parity_mask(cutoff), np.outer(c, c), 0.0)
    return FockOperator(rho, cutoff, hermitian=True)


def annihilation(cutoff: int) -> FockOperator:
    cutoff = _check_cutoff(cutoff)
    return FockOperator(np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1), cutoff)


def interior_size(r: float, cutoff: int) -> int:
    """Highest level ``n`` for which a truncated squeeze of strength ``r``
    still acts like the untruncated one (``cutoff * exp(-2|r|) / 4``)."""
    return int(cutoff * math.exp(-2.0 * abs(r)) / 4)


def _squeeze_entries(r: float, cutoff: int) -> np.ndarray:
    a = annihilation(cutoff).entries
    ad = a.T
    # the generator changes n by 2, so odd n+m entries vanish identically
    return np.where(parity_mask(cutoff), expm(0.5 * r * (ad @ ad - a @ a)), 0.0)


def heisenberg_residual(r: float, cutoff: int, interior: int | None = None) -> float:
    """``max |(U a U^dag - (a cosh r - a^dag sinh r))_nm|`` over ``n, m <= interior``."""
    if interior is None:
        interior = interior_size(r, cutoff)
    U = _squeeze_entries(r, cutoff)
    a = annihilation(cutoff).entries
    lhs = U @ a @ U.T
    rhs = a * math.cosh(r) - a.T * math.sinh(r)
    return float(np.abs(lhs - rhs)[: interior + 1, : interior + 1].max())


def squeeze_matrix(r: float, cutoff: int, check: bool = True) -> FockOperator:
    """Truncated single-mode squeezer ``U(r)``.

    The generator is truncated before exponentiation, so the result is
    exactly orthogonal; matrix elements are faithful only on the low-``n``
    block (see :func:`interior_size`).  With ``check`` set, a warning is
    issued when that block has fewer than three levels or the Heisenberg
    action on it is off by more than ``1e-8``.
    """
    if not np.isfinite(r) or abs(r) > MAX_SQUEEZE:
        raise ValueError(f"|r| must be <= {MAX_SQUEEZE}")
    cutoff = _check_cutoff(cutoff)
    U = _squeeze_entries(r, cutoff)
    if check and r != 0.0:
        a = annihilation(cutoff).entries
        h = interior_size(r, cutoff) + 1
        resid = np.abs(U @ a @ U.T - (a * math.cosh(r) - a.T * math.sinh(r)))[:h, :h].max()
        if h < 3:
            warnings.warn(f"squeeze r={r} at cutoff {cutoff}: no faithful block; raise the cutoff",
                          stacklevel=2)
        elif resid > SQUEEZE_TOL:
            warnings.warn(f"squeeze r={r} at cutoff {cutoff}: interior residual {resid:.2e}",
                          stacklevel=2)
    return FockOperator(U, cutoff)


def eigh(op: FockOperator):
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    if not op.hermitian:
        raise ValueError("eigh needs an operator flagged hermitian")
    return np.linalg.eigh(op.entries)


def frame_amplitudes(q: np.ndarray, r: float, cutoff: int) -> np.ndarray:
    """Amplitudes ``<n| U^dag(r) |alpha = q/sqrt 2>`` for an array of ``q``.

    Returns an array of shape ``(len(q), cutoff + 1)``.  At ``r = 0`` these
    are the coherent-state amplitudes; otherwise they are displaced squeezed
    state amplitudes, built from the scaled Hermite recurrence

        g_{n+1} = (q / (sqrt2 cosh r) g_n - tanh(r) sqrt(n) g_{n-1}) / sqrt(n+1)

    times ``exp(-q^2 (1 - tanh r) / 4) / sqrt(cosh r)``.  Large intermediate
    values are rescaled on the fly so nothing overflows.
    """
    q = np.asarray(q, dtype=float)
    cutoff = _check_cutoff(cutoff)
    t = math.tanh(r)
    ch = math.cosh(r)
    base = -q**2 * (1.0 - t) / 4.0 - 0.5 * math.log(ch)
    out = np.empty((q.size, cutoff + 1))
    g_prev = np.zeros_like(q)
    g = np.ones_like(q)
    log_scale = np.zeros_like(q)
    step = q / (math.sqrt(2.0) * ch)
    with np.errstate(under="ignore"):
        out[:, 0] = np.exp(base)
        for n in range(cutoff):
            g_prev, g = g, (step * g - t * math.sqrt(n) * g_prev) / math.sqrt(n + 1)
            big = np.abs(g) > 1e150
            if big.any():
                g[big] *= 1e-150
                g_prev[big] *= 1e-150
                log_scale[big] += 150.0 * math.log(10.0)
            out[:, n + 1] = g * np.exp(base + log_scale)
    return out
