"""Quadratic forms on finite-dimensional spaces with a fixed orthonormal basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

SYMMETRY_RTOL = 1e-12
DEFAULT_RTOL = 1e-9


@dataclass(frozen=True)
class QuadraticForm:
    """The form ``u -> <L u, u>`` represented by the symmetric matrix ``L``."""

    L: np.ndarray
    basis_label: str = ""
    _eigs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.L, dtype=float))
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise PreconditionError(f"representing matrix must be square, got {L.shape}")
        scale = np.max(np.abs(L)) if L.size else 0.0
        if L.size and np.max(np.abs(L - L.T)) > SYMMETRY_RTOL * scale:
            raise PreconditionError("representing matrix is not symmetric")
        L = 0.5 * (L + L.T)
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        eigs = np.linalg.eigvalsh(L) if L.size else np.zeros(0)
        object.__setattr__(self, "_eigs", eigs)

    @classmethod
    def from_matrix(cls, M, basis_label: str = "") -> QuadraticForm:
        """Build from a nearly symmetric matrix, discarding its skew part."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(0.5 * (M + M.T), basis_label)

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigs

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self._eigs))) if self.dim else 0.0

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.L @ u)

    def __add__(self, other: QuadraticForm) -> QuadraticForm:
        if other.dim != self.dim:
            raise PreconditionError("forms live on spaces of different dimension")
        return QuadraticForm(self.L + other.L, self.basis_label)

    def __neg__(self) -> QuadraticForm:
        return QuadraticForm(-self.L, self.basis_label)

    def congruent(self, M) -> QuadraticForm:
        """Pull back along ``M``: the form with matrix ``M^T L M``."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return QuadraticForm.from_matrix(M.T @ self.L @ M)

    def default_tol(self) -> float:
        return DEFAULT_RTOL * self.norm


def _tol(Q: QuadraticForm, tol: float | None) -> float:
    if tol is None:
        return Q.default_tol()
    if tol < 0:
        raise PreconditionError("tolerance must be non-negative")
    return tol


def signature(Q: QuadraticForm, tol: float | None = None) -> tuple[int, int, int]:
    """Return ``(m_plus, m_minus, m_zero)``; eigenvalues within ``tol`` of zero count as zero.

    ``tol`` defaults to ``1e-9 * ||L||``.
    """
    t = _tol(Q, tol)
    e = Q.eigenvalues
    m_plus = int(np.count_nonzero(e > t))
    m_minus = int(np.count_nonzero(e < -t))
    return m_plus, m_minus, Q.dim - m_plus - m_minus


def sgn(Q: QuadraticForm, tol: float | None = None) -> int:
    m_plus, m_minus, _ = signature(Q, tol)
    return m_plus - m_minus


def is_nondegenerate(Q: QuadraticForm, tol: float | None = None) -> bool:
    return signature(Q, tol)[2] == 0


def perturbation_preserves(Q1: QuadraticForm, Q2: QuadraticForm) -> bool:
    """Sufficient test that ``Q1 + Q2`` keeps the signature of ``Q1``.

    True iff ``||L_Q2|| < ||L_Q1^{-1}||^{-1}``; the right side is the smallest
    absolute eigenvalue of ``L_Q1``.
    """
    if Q1.dim != Q2.dim:
        raise PreconditionError("forms live on spaces of different dimension")
    if not is_nondegenerate(Q1):
        raise PreconditionError("Q1 must be non-degenerate")
    if Q1.dim == 0:
        return True
    return Q2.norm < float(np.min(np.abs(Q1.eigenvalues)))
