"""Lagrangian subspaces of ``(R^{2n}, omega)``, crossing forms and Maslov indices.

``omega(u, v) = <J u, v>`` with ``J = [[0, -I], [I, 0]]``. Subspaces may also be
attached to another orthogonal complex structure (used for the product space
``R^{2n} x R^{2n}`` with ``J x (-J)``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import block_diag, expm

from ._scan import DETECT_TOL, opening_rate, scan_zeros, spacings
from .errors import (
    ConvergenceError,
    IrregularCrossingError,
    NoCrossingError,
    PreconditionError,
    StepTooLargeError,
)
from .qforms import QuadraticForm, is_nondegenerate, sgn

ORTHO_TOL = 1e-10
ISOTROPY_TOL = 1e-9
INTERSECTION_TOL = 1e-6
ENDPOINT_TOL = 1e-6
FORM_TOL = 1e-6
FD_STEP = 1e-5
RICHARDSON_RTOL = 1e-4
RICHARDSON_ATOL = 1e-7
CHART_COND_MAX = 1e8
ROTATION_DELTAS = (1e-3, -1e-3, 3e-3, -3e-3, 1e-2, -1e-2)


def standard_J(n: int) -> np.ndarray:
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, -I], [I, Z]])


def product_J(n: int) -> np.ndarray:
    """``J x (-J)`` on ``R^{2n} x R^{2n}``."""
    J = standard_J(n)
    return block_diag(J, -J)


def omega(u, v, J=None) -> float:
    u = np.asarray(u, dtype=float)
    J = standard_J(len(u) // 2) if J is None else J
    return float((J @ u) @ np.asarray(v, dtype=float))


def isotropy_defect(frame: np.ndarray, J: np.ndarray) -> float:
    return float(np.max(np.abs(frame.T @ J @ frame))) if frame.size else 0.0


def is_symplectic(M: np.ndarray, tol: float = 1e-9) -> bool:
    M = np.asarray(M, dtype=float)
    J = standard_J(M.shape[0] // 2)
    scale = max(1.0, float(np.linalg.norm(M, 2)) ** 2)
    return float(np.max(np.abs(M.T @ J @ M - J))) <= tol * scale


def _orthonormal(M: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= 1e-12 * max(1.0, d.max()):
        raise PreconditionError("spanning columns are linearly dependent")
    signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
    return Q * signs


@dataclass(frozen=True, eq=False)
class LagrangianSubspace:
    """Lagrangian subspace stored as a ``2n x n`` orthonormal frame."""

    frame: np.ndarray
    J: np.ndarray | None = None

    def __post_init__(self):
        F = np.asarray(self.frame, dtype=float)
        if F.ndim != 2 or F.shape[0] != 2 * F.shape[1]:
            raise PreconditionError(f"frame must be 2n x n, got {F.shape}")
        J = standard_J(F.shape[1]) if self.J is None else np.asarray(self.J, dtype=float)
        if np.max(np.abs(F.T @ F - np.eye(F.shape[1]))) > ORTHO_TOL:
            raise PreconditionError("frame columns are not orthonormal")
        defect = isotropy_defect(F, J)
        if defect > ISOTROPY_TOL:
            raise PreconditionError(f"subspace is not Lagrangian (isotropy defect {defect:.3e})")
        F = F.copy()
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)
        object.__setattr__(self, "J", J)

    @classmethod
    def from_span(cls, M, J=None) -> LagrangianSubspace:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] == 1:
            M = M.T
        return cls(_orthonormal(M), J)

    @property
    def n(self) -> int:
        return self.frame.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    @property
    def isotropy(self) -> float:
        return isotropy_defect(self.frame, self.J)

    def complement(self) -> LagrangianSubspace:
        """``J V``: Lagrangian, orthogonal to ``V``, hence transversal."""
        return LagrangianSubspace(self.J @ self.frame, self.J)

    def transformed(self, M) -> LagrangianSubspace:
        return LagrangianSubspace(_orthonormal(np.asarray(M, dtype=float) @ self.frame), self.J)


def _frame(V) -> np.ndarray:
    return V.frame if isinstance(V, LagrangianSubspace) else np.asarray(V, dtype=float)


def grassmann_distance(V, W) -> float:
    """Spectral norm of the difference of the orthogonal projectors."""
    A, B = _frame(V), _frame(W)
    if A.shape[0] != B.shape[0]:
        raise PreconditionError("subspaces live in different ambient spaces")
    return float(np.linalg.norm(A @ A.T - B @ B.T, 2))


def principal_sines(V, W) -> np.ndarray:
    """Sines of the principal angles between two equidimensional subspaces, ascending.

    Computed from ``(I - P_V) W`` rather than ``V^T W`` so that small angles
    keep full relative accuracy.
    """
    A, B = _frame(V), _frame(W)
    s = np.linalg.svd(B - A @ (A.T @ B), compute_uv=False)
    return np.sort(np.clip(s, 0.0, 1.0))


def smallest_sine(V, W) -> float:
    return float(principal_sines(V, W)[0])


def intersection(V, W, tol: float = INTERSECTION_TOL) -> np.ndarray:
    """Orthonormal basis (``2n x k``) of the numerical intersection of ``V`` and ``W``.

    ``k`` counts the principal angles whose sine is below ``tol``; the basis is
    the normalized mean of the corresponding principal vector pairs.
    """
    A, B = _frame(V), _frame(W)
    k = int(np.count_nonzero(principal_sines(A, B) < tol))
    if k == 0:
        return np.zeros((A.shape[0], 0))
    P, _, Qt = np.linalg.svd(A.T @ B)
    X = 0.5 * (A @ P[:, :k] + B @ Qt.T[:, :k])
    return _orthonormal(X)


class LagrangianPath:
    """A map ``[0, 1] -> Lambda(n)`` given by a callable.

    ``func(lam)`` may return a :class:`LagrangianSubspace` or a spanning matrix.
    Evaluations are memoized. Derivatives are taken by central differences, so
    ``func`` must also accept parameters slightly outside ``[0, 1]``.
    """

    def __init__(self, func: Callable, J=None, cache: bool = True):
        self._func = func
        self._J = J
        self._cache: dict[float, LagrangianSubspace] | None = {} if cache else None

    def __call__(self, lam: float) -> LagrangianSubspace:
        lam = float(lam)
        if self._cache is not None and lam in self._cache:
            return self._cache[lam]
        out = self._func(lam)
        if not isinstance(out, LagrangianSubspace):
            out = LagrangianSubspace.from_span(out, self._J)
        if self._cache is not None:
            self._cache[lam] = out
        return out

    @property
    def J(self) -> np.ndarray:
        return self(0.0).J

    def evaluated(self) -> dict[float, LagrangianSubspace]:
        """Subspaces computed so far, keyed by parameter (empty without caching)."""
        return dict(self._cache or {})

    @classmethod
    def constant(cls, V: LagrangianSubspace) -> LagrangianPath:
        return cls(lambda lam: V)

    def reversed(self) -> LagrangianPath:
        return LagrangianPath(lambda lam: self(1.0 - lam))

    def transformed(self, M) -> LagrangianPath:
        """``lam -> M(lam) gamma(lam)`` for a fixed matrix or a callable ``M``."""
        if callable(M):
            return LagrangianPath(lambda lam: self(lam).transformed(M(lam)))
        M = np.asarray(M, dtype=float)
        return LagrangianPath(lambda lam: self(lam).transformed(M))

    def rotated(self, delta: float) -> LagrangianPath:
        """``lam -> exp(delta * lam * J) gamma(lam)``."""
        J = self.J
        return LagrangianPath(lambda lam: self(lam).transformed(expm(delta * lam * J)))

    def concatenate(self, other: LagrangianPath) -> LagrangianPath:
        """Run ``self`` on ``[0, 1/2]`` and ``other`` on ``[1/2, 1]``."""

        def func(lam):
            return self(2.0 * lam) if lam <= 0.5 else other(2.0 * lam - 1.0)

        return LagrangianPath(func)

    def reparametrized(self, a: float, b: float) -> LagrangianPath:
        return LagrangianPath(lambda lam: self(a + (b - a) * lam))


def _chart(F0: np.ndarray, JF0: np.ndarray, F: np.ndarray) -> np.ndarray:
    # gamma(lam) as the graph of phi: gamma(l0) -> J gamma(l0); returns the matrix of v -> omega(v, phi(v))
    A = F0.T @ F
    if np.linalg.cond(A) > CHART_COND_MAX:
        raise StepTooLargeError("path leaves the graph chart over gamma(lambda0)")
    X = np.linalg.solve(A.T, (JF0.T @ F).T).T
    return 0.5 * (X + X.T)


def chart_derivative(gamma: LagrangianPath, lambda0: float, h: float = FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Derivative at ``lambda0`` of the chart form of ``gamma`` in ``gamma(lambda0)`` coordinates.

    Returns ``(F0, D)`` where ``F0`` is the frame of ``gamma(lambda0)`` and ``D``
    the symmetric ``n x n`` derivative. Uses a Richardson-checked central
    difference; the step is halved while the path leaves the chart.
    """
    V0 = gamma(lambda0)
    F0 = V0.frame
    JF0 = V0.J @ F0

    def central(step):
        return (_chart(F0, JF0, gamma(lambda0 + step).frame) - _chart(F0, JF0, gamma(lambda0 - step).frame)) / (2 * step)

    for _ in range(8):
        try:
            coarse = central(h)
            fine = central(h / 2)
            break
        except StepTooLargeError:
            h /= 2
    else:
        raise StepTooLargeError(f"no usable difference step at lambda={lambda0:.10g}")
    err = float(np.max(np.abs(coarse - fine)))
    scale = float(np.max(np.abs(fine)))
    if err > RICHARDSON_RTOL * scale + RICHARDSON_ATOL:
        raise ConvergenceError(
            f"crossing-form difference quotients disagree at lambda={lambda0:.10g} (|diff|={err:.3e})"
        )
    return F0, (4.0 * fine - coarse) / 3.0


def crossing_form(
    gamma: LagrangianPath, V: LagrangianSubspace, lambda0: float, h: float = FD_STEP, tol: float = INTERSECTION_TOL
) -> QuadraticForm:
    """Crossing form of ``gamma`` against ``V`` at ``lambda0``.

    The form ``v -> d/dlam omega(v, phi_lam(v))`` with the chart complement
    ``J gamma(lambda0)``, restricted to ``gamma(lambda0) ∩ V`` and written in
    the orthonormal basis returned by :func:`intersection`.
    """
    X = intersection(gamma(lambda0), V, tol)
    if X.shape[1] == 0:
        raise NoCrossingError(f"lambda={lambda0:.10g} is not a crossing")
    F0, D = chart_derivative(gamma, lambda0, h)
    a = F0.T @ X
    return QuadraticForm.from_matrix(a.T @ D @ a, "gamma(l0)∩V")


def relative_crossing_form(
    gamma1: LagrangianPath, gamma2: LagrangianPath, lambda0: float, h: float = FD_STEP, tol: float = INTERSECTION_TOL
) -> QuadraticForm:
    """``Gamma(gamma1, gamma2(l0), l0) - Gamma(gamma2, gamma1(l0), l0)`` on the intersection."""
    X = intersection(gamma1(lambda0), gamma2(lambda0), tol)
    if X.shape[1] == 0:
        raise NoCrossingError(f"lambda={lambda0:.10g} is not a crossing")
    F1, D1 = chart_derivative(gamma1, lambda0, h)
    F2, D2 = chart_derivative(gamma2, lambda0, h)
    a1 = F1.T @ X
    a2 = F2.T @ X
    return QuadraticForm.from_matrix(a1.T @ D1 @ a1 - a2.T @ D2 @ a2, "gamma1(l0)∩gamma2(l0)")


def symplectic_path_crossing_form(
    Psi: Callable[[float], np.ndarray], lambda0: float, h: float = FD_STEP, tol: float = 1e-8
) -> QuadraticForm:
    """Crossing form of ``lam -> Psi(lam)({0} x R^n)`` against ``{0} x R^n``.

    Returned as ``q[u] = -<d u, b' u>`` on ``ker b`` (orthonormal basis), where
    ``b`` and ``d`` are the upper-right and lower-right blocks of ``Psi(lambda0)``.
    """
    P0 = np.asarray(Psi(lambda0), dtype=float)
    n = P0.shape[0] // 2
    if not is_symplectic(P0):
        raise PreconditionError(f"Psi({lambda0:.10g}) is not symplectic")
    b = P0[:n, n:]
    d = P0[n:, n:]
    _, s, Vt = np.linalg.svd(b)
    null = s <= tol * max(1.0, float(np.linalg.norm(P0, 2)))
    if not null.any():
        raise NoCrossingError(f"b is invertible at lambda={lambda0:.10g}")
    U = Vt[null].T
    b_dot = (np.asarray(Psi(lambda0 + h))[:n, n:] - np.asarray(Psi(lambda0 - h))[:n, n:]) / (2 * h)
    return QuadraticForm.from_matrix(-(d @ U).T @ (b_dot @ U), "ker b")


@dataclass(frozen=True)
class LagrangianCrossing:
    lam: float
    form: QuadraticForm
    signature: int
    regular: bool


@dataclass(frozen=True)
class MaslovResult:
    index: int
    crossings: list[LagrangianCrossing]
    delta: float = 0.0
    clustered: bool = False


def _collect(
    detector, form_at, grid_size, form_tol, what, detect_tol=DETECT_TOL
) -> tuple[list[LagrangianCrossing], bool]:
    for end in (0.0, 1.0):
        if detector(end) < ENDPOINT_TOL:
            raise PreconditionError(f"{what}: endpoint lambda={end:g} is not transversal")
    scan = scan_zeros(detector, grid_size, detect_tol)
    out = []
    for lam, gap in zip(scan.locations, spacings(scan.locations)):
        Q = form_at(lam)
        # a degenerate tangency can masquerade as a tiny nonzero form at a misplaced lam
        _, transversal = opening_rate(detector, lam, gap)
        regular = is_nondegenerate(Q, form_tol) and transversal
        out.append(LagrangianCrossing(lam, Q, sgn(Q, form_tol), regular))
    return out, scan.clustered


def _regularized(compute, base_path: LagrangianPath, deltas) -> MaslovResult:
    crossings, clustered = compute(base_path)
    if all(c.regular for c in crossings):
        return MaslovResult(sum(c.signature for c in crossings), crossings, 0.0, clustered)
    bad = [c.lam for c in crossings if not c.regular]
    for delta in deltas:
        try:
            crossings, clustered = compute(base_path.rotated(delta))
        except PreconditionError:
            continue
        if all(c.regular for c in crossings):
            return MaslovResult(sum(c.signature for c in crossings), crossings, float(delta), clustered)
    raise IrregularCrossingError(bad[0], f"no rotation in {tuple(deltas)} regularizes the crossings")


def maslov(
    gamma: LagrangianPath,
    V: LagrangianSubspace,
    grid_size: int = 200,
    h: float = FD_STEP,
    form_tol: float = FORM_TOL,
    deltas=ROTATION_DELTAS,
    detect_tol: float = DETECT_TOL,
) -> MaslovResult:
    """Maslov index of ``gamma`` with respect to ``V`` with its crossing data.

    Non-regular crossings trigger the perturbation ``exp(delta lam J) gamma(lam)``
    for ``delta`` taken in order from ``deltas``.
    """

    def compute(path):
        return _collect(
            lambda lam: smallest_sine(path(lam), V),
            lambda lam: crossing_form(path, V, lam, h),
            grid_size,
            form_tol,
            "maslov_index",
            detect_tol,
        )

    return _regularized(compute, gamma, deltas)


def maslov_index(gamma: LagrangianPath, V: LagrangianSubspace, grid_size: int = 200, **kwargs) -> int:
    return maslov(gamma, V, grid_size, **kwargs).index


def relative_maslov(
    gamma1: LagrangianPath,
    gamma2: LagrangianPath,
    grid_size: int = 200,
    route: str = "direct",
    h: float = FD_STEP,
    form_tol: float = FORM_TOL,
    deltas=ROTATION_DELTAS,
    detect_tol: float = DETECT_TOL,
) -> MaslovResult:
    """Relative Maslov index of the pair ``(gamma1, gamma2)``.

    ``route="direct"`` sums signatures of the relative crossing form;
    ``route="product"`` computes the Maslov index of ``gamma1 x gamma2`` against
    the diagonal of ``R^{2n} x R^{2n}`` with the structure ``J x (-J)``.
    """
    if route == "product":
        n = gamma1(0.0).n
        Jp = product_J(n)
        diagonal = LagrangianSubspace(np.vstack([np.eye(2 * n), np.eye(2 * n)]) / np.sqrt(2.0), Jp)
        pair = LagrangianPath(lambda lam: LagrangianSubspace(block_diag(gamma1(lam).frame, gamma2(lam).frame), Jp))
        return maslov(pair, diagonal, grid_size, h, form_tol, deltas, detect_tol)
    if route != "direct":
        raise ValueError(f"unknown route {route!r}")

    def compute(path):
        return _collect(
            lambda lam: smallest_sine(path(lam), gamma2(lam)),
            lambda lam: relative_crossing_form(path, gamma2, lam, h),
            grid_size,
            form_tol,
            "relative_maslov_index",
            detect_tol,
        )

    return _regularized(compute, gamma1, deltas)


def relative_maslov_index(gamma1: LagrangianPath, gamma2: LagrangianPath, grid_size: int = 200, **kwargs) -> int:
    return relative_maslov(gamma1, gamma2, grid_size, **kwargs).index


__all__ = [
    "DETECT_TOL",
    "LagrangianCrossing",
    "LagrangianPath",
    "LagrangianSubspace",
    "MaslovResult",
    "chart_derivative",
    "crossing_form",
    "grassmann_distance",
    "intersection",
    "is_symplectic",
    "isotropy_defect",
    "maslov",
    "maslov_index",
    "omega",
    "principal_sines",
    "product_J",
    "relative_crossing_form",
    "relative_maslov",
    "relative_maslov_index",
    "smallest_sine",
    "standard_J",
    "symplectic_path_crossing_form",
]
