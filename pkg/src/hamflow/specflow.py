"""Spectral flow of ``lam -> A_lam = J d/dt + S_lam(t)`` by two independent routes.

* crossing forms: locate the parameters where ``E^u(0)`` meets ``E^s(0)`` and sum
  the signatures of ``u -> int <dS/dlam u, u>`` on the kernel;
* windowed eigenvalue counting for a truncated, discretized operator on
  ``[-T, T]`` with Lagrangian boundary conditions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded

from . import kernels
from ._scan import DETECT_TOL, opening_rate, scan_zeros, spacings
from .errors import AssumptionError, ConvergenceError, HamflowError, IrregularCrossingError
from .hamsys import (
    FlowSolver,
    HamiltonianFamily,
    IntersectionDetector,
    check_hyperbolic,
    invariant_subspace_stable,
    invariant_subspace_unstable,
    kernel,
    operator_crossing_form,
)
from .qforms import QuadraticForm, signature
from .symplectic import ENDPOINT_TOL, FORM_TOL, LagrangianSubspace, intersection

DEFAULT_DELTAS = (0.0, 1e-4, -1e-4, 3e-4, -3e-4, 1e-3, -1e-3, 3e-3, -3e-3)
WINDOW_CAP = 0.25
WINDOW_FLOOR = 1e-6
MOVE_SAFETY = 1.5
MAX_BISECTIONS = 12


@dataclass(frozen=True)
class CrossingReport:
    lambda0: float
    kernel_dim: int
    form: QuadraticForm
    signature: int
    regular: bool
    opening_rate: float = float("nan")
    kernel_residual: float = float("nan")


@dataclass
class CrossingScan:
    locations: list[float]
    grid: np.ndarray
    detector: np.ndarray
    clustered: bool
    evaluate: IntersectionDetector | None = None


def scan_crossings(
    fam: HamiltonianFamily,
    grid_size: int = 200,
    t0: float = 0.0,
    solver: FlowSolver | None = None,
    detect_tol: float = DETECT_TOL,
    detector: IntersectionDetector | None = None,
) -> CrossingScan:
    """Crossings of ``fam`` with the detector trace they were found from."""
    detector = detector or IntersectionDetector(fam, t0, solver)
    for end in (0.0, 1.0):
        d = detector(end)
        if d < ENDPOINT_TOL:
            raise AssumptionError("A2", end, f"E^u and E^s nearly intersect (smallest sine {d:.3e})")
    scan = scan_zeros(detector, grid_size, detect_tol)
    return CrossingScan(scan.locations, scan.grid, scan.values, scan.clustered, detector)


def detect_crossings(fam: HamiltonianFamily, grid_size: int = 200, **kwargs) -> list[float]:
    """Sorted parameters in ``(0, 1)`` where ``E^u_lam(0) ∩ E^s_lam(0) != {0}``."""
    return scan_crossings(fam, grid_size, **kwargs).locations


def crossing_report(
    fam: HamiltonianFamily,
    lambda0: float,
    solver: FlowSolver | None = None,
    form_tol: float = FORM_TOL,
    detector: IntersectionDetector | None = None,
    spacing: float = 1.0,
) -> CrossingReport:
    """Kernel, crossing form and regularity at ``lambda0``.

    Regular means the form is non-degenerate at ``form_tol`` and the
    intersection detector opens linearly around ``lambda0``.
    """
    kb = kernel(fam, lambda0, solver=solver)
    if kb.dim > fam.n:
        raise ConvergenceError(f"kernel dimension {kb.dim} exceeds n={fam.n} at lambda={lambda0:.10g}")
    Q = operator_crossing_form(fam, kb)
    m_plus, m_minus, m_zero = signature(Q, form_tol)
    detector = detector or IntersectionDetector(fam, 0.0, solver)
    rate, transversal = opening_rate(detector, lambda0, spacing)
    return CrossingReport(
        float(lambda0), kb.dim, Q, m_plus - m_minus, m_zero == 0 and transversal, rate, kb.residual
    )


def _reports(fam, scan: CrossingScan, solver, form_tol) -> list[CrossingReport]:
    return [
        crossing_report(fam, lam, solver, form_tol, scan.evaluate, gap)
        for lam, gap in zip(scan.locations, spacings(scan.locations))
    ]


def endpoint_terms(fam: HamiltonianFamily, solver: FlowSolver | None = None, form_tol: float = FORM_TOL):
    """``(m^-(Gamma(A, 0)), m^+(Gamma(A, 1)))``; both vanish when the ends are invertible."""
    detector = IntersectionDetector(fam, 0.0, solver)
    out = []
    for end, pick in ((0.0, 1), (1.0, 0)):
        X = intersection(detector.unstable(end), detector.stable(end))
        if X.shape[1] == 0:
            out.append(0)
            continue
        Q = operator_crossing_form(fam, kernel(fam, end, solver=solver))
        out.append(signature(Q, form_tol)[pick])
    return tuple(out)


def spectral_flow_crossings(
    fam: HamiltonianFamily,
    grid_size: int = 200,
    solver: FlowSolver | None = None,
    form_tol: float = FORM_TOL,
    scan: CrossingScan | None = None,
) -> tuple[int, list[CrossingReport]]:
    """Spectral flow as the sum of crossing-form signatures.

    Raises :class:`IrregularCrossingError` if some crossing form is degenerate;
    :func:`regularize` the family first in that case.
    """
    scan = scan or scan_crossings(fam, grid_size, solver=solver)
    reports = _reports(fam, scan, solver, form_tol)
    for r in reports:
        if not r.regular:
            raise IrregularCrossingError(
                r.lambda0,
                f"crossing form eigenvalues {r.form.eigenvalues}, opening rate {r.opening_rate:.3e}; regularize first",
            )
    m_minus_0, m_plus_1 = endpoint_terms(fam, solver, form_tol)
    if m_minus_0 or m_plus_1:
        raise AssumptionError("A2", None, "endpoint crossing forms do not vanish")
    return -m_minus_0 + sum(r.signature for r in reports) + m_plus_1, reports


@dataclass
class Regularization:
    delta: float
    family: HamiltonianFamily
    reports: list[CrossingReport]
    attempts: dict[float, str] = field(default_factory=dict)


def regularize_family(
    fam: HamiltonianFamily,
    delta_grid=DEFAULT_DELTAS,
    grid_size: int = 200,
    solver: FlowSolver | None = None,
    form_tol: float = FORM_TOL,
    detect_tol: float = DETECT_TOL,
) -> Regularization:
    """Smallest ``|delta|`` in the grid for which ``S + delta I`` has only regular crossings."""
    attempts: dict[float, str] = {}
    for delta in sorted(delta_grid, key=lambda d: (abs(d), d < 0)):
        shifted = fam if delta == 0 else fam.shifted(delta)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                scan = scan_crossings(shifted, grid_size, solver=solver, detect_tol=detect_tol)
            reports = _reports(shifted, scan, solver, form_tol)
        except HamflowError as exc:
            attempts[delta] = f"{type(exc).__name__}: {exc}"
            continue
        bad = [r.lambda0 for r in reports if not r.regular]
        if not bad and not scan.clustered:
            return Regularization(float(delta), shifted, reports, attempts)
        attempts[delta] = f"non-regular crossings at {bad}" if bad else "clustered crossings"
    detail = "; ".join(f"delta={d:g}: {msg}" for d, msg in attempts.items())
    raise ConvergenceError(f"no shift in the grid regularizes the family ({detail})")


def regularize(fam: HamiltonianFamily, delta_grid=DEFAULT_DELTAS, **kwargs) -> tuple[float, HamiltonianFamily]:
    reg = regularize_family(fam, delta_grid, **kwargs)
    return reg.delta, reg.family


class DiscretizedPath:
    """Truncation of ``A_lam`` to ``[-T_num, T_num]`` on a staggered grid.

    ``q`` lives on the ``N`` nodes and ``p`` on the ``N - 1`` cell midpoints; the
    boundary values ``u(-T) = F_L c_L`` and ``u(T) = F_R c_R`` are substituted
    through the Lagrangian frames, which makes the discrete form symmetric.
    The staggering avoids the spurious zero modes of centered differences.

    :meth:`assemble` returns the mass-scaled operator in LAPACK lower band
    storage with lower bandwidth ``2n - 1``.
    """

    def __init__(self, fam: HamiltonianFamily, T_num: float, N: int, left: LagrangianSubspace, right: LagrangianSubspace):
        if N < 3:
            raise ValueError("need at least three grid nodes")
        self.fam = fam
        self.T_num = float(T_num)
        self.N = int(N)
        self.left = left
        self.right = right
        n = fam.n
        self.n = n
        self.t = np.linspace(-self.T_num, self.T_num, self.N)
        self.h = self.t[1] - self.t[0]
        self.t_mid = 0.5 * (self.t[:-1] + self.t[1:])
        self.n_blocks = 2 * self.N - 1
        self.size = self.n_blocks * n
        self.bandwidth = 2 * n - 1
        E = np.broadcast_to(np.eye(n), (self.N, n, n)).copy()
        E[0] = left.frame[:n]
        E[-1] = right.frame[:n]
        self._E = E
        w = np.full(self.N, self.h)
        w[[0, -1]] = 0.5 * self.h
        self._w = w
        mass = np.full(self.n_blocks, self.h)
        mass[[0, -1]] = 0.5 * self.h
        self._block_scale = 1.0 / np.sqrt(mass)
        YL, XL = left.frame[n:], left.frame[:n]
        YR, XR = right.frame[n:], right.frame[:n]
        self._boundary = (0.5 * (YL.T @ XL + XL.T @ YL), -0.5 * (YR.T @ XR + XR.T @ YR))
        bi, bj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        self._bi, self._bj = bi, bj

    def _blocks(self, lam: float):
        n = self.n
        Sn = self.fam.matrices(lam, self.t)
        Sm = self.fam.matrices(lam, self.t_mid)
        E = self._E
        Et = np.swapaxes(E, 1, 2)
        node = self._w[:, None, None] * (Et @ Sn[:, :n, :n] @ E)
        node[0] += self._boundary[0]
        node[-1] += self._boundary[1]
        mid = self.h * Sm[:, n:, n:]
        half_pq = 0.5 * self.h * Sm[:, n:, :n]
        # rows p_k, columns node k (left) and node k + 1 (right)
        left = -E[:-1] + half_pq @ E[:-1]
        right = E[1:] + half_pq @ E[1:]
        return node, mid, left, right

    def block_tridiagonal(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """Mass-scaled operator as ``(diag, sub)`` blocks; ``sub[b] = A[b + 1, b]``."""
        node, mid, left, right = self._blocks(lam)
        n = self.n
        diag = np.empty((self.n_blocks, n, n))
        diag[0::2] = node
        diag[1::2] = mid
        sub = np.empty((self.n_blocks - 1, n, n))
        # p_k sits after node k and before node k + 1
        sub[0::2] = left
        sub[1::2] = np.swapaxes(right, 1, 2)
        s = self._block_scale
        diag *= (s * s)[:, None, None]
        sub *= (s[1:] * s[:-1])[:, None, None]
        return diag, sub

    def assemble(self, lam: float) -> np.ndarray:
        """LAPACK lower band storage of the mass-scaled operator."""
        diag, sub = self.block_tridiagonal(lam)
        n = self.n
        band = np.zeros((self.bandwidth + 1, self.size))
        bi, bj = self._bi, self._bj
        starts = n * np.arange(self.n_blocks)

        def put(r0, c0, blocks):
            rows = r0[:, None, None] + bi
            cols = c0[:, None, None] + bj
            keep = rows >= cols
            band[(rows - cols)[keep], cols[keep]] = blocks[keep]

        put(starts, starts, diag)
        put(starts[1:], starts[:-1], sub)
        return band

    def dense(self, lam: float) -> np.ndarray:
        band = self.assemble(lam)
        A = np.zeros((self.size, self.size))
        for d in range(self.bandwidth + 1):
            idx = np.arange(self.size - d)
            A[idx + d, idx] = band[d, : self.size - d]
            A[idx, idx + d] = band[d, : self.size - d]
        return A

    def eigenvalues(self, lam: float, radius: float, backend: str | None = None) -> np.ndarray:
        """Eigenvalues in ``[-radius, radius)``.

        The numba backend bisects on inertia counts; the numpy backend calls
        LAPACK's banded solver.
        """
        backend = backend or kernels.BACKEND
        if backend == "numba":
            return kernels.bisect_eigenvalues(self.assemble(lam), -radius, radius, backend=backend)
        eigs = eig_banded(
            self.assemble(lam), lower=True, eigvals_only=True, select="v", select_range=(-radius, radius), check_finite=False
        )
        return eigs[eigs < radius]


def block_inf_norm(diag: np.ndarray, sub: np.ndarray) -> float:
    """Max absolute row sum of a symmetric block-tridiagonal matrix."""
    rows = np.abs(diag).sum(axis=2)
    rows[1:] += np.abs(sub).sum(axis=2)
    rows[:-1] += np.abs(sub).sum(axis=1)
    return float(rows.max())


def default_discretization(
    fam: HamiltonianFamily,
    T_num: float | None = None,
    N: int | None = None,
    boundary: str = "plateau",
    h_target: float = 0.02,
) -> DiscretizedPath:
    """Discretization with the default truncation and boundary choices.

    ``T_num = max(3 T_plateau, 12 / gap)`` with ``gap`` the smallest
    hyperbolicity gap of the limits over a parameter sample; ``N`` gives a node
    spacing of about ``h_target``. ``boundary="plateau"`` uses ``E^u_0(-inf)``
    on the left and ``E^s_0(+inf)`` on the right; ``"dirichlet"`` uses
    ``{0} x R^n`` at both ends.
    """
    if T_num is None:
        gap = min(check_hyperbolic(fam.limit(lam, side))[1] for lam in np.linspace(0, 1, 11) for side in (+1, -1))
        T_num = max(3.0 * fam.T_plateau, 12.0 / gap)
    if N is None:
        N = int(math.ceil(2.0 * T_num / h_target)) + 1
    n = fam.n
    if boundary == "plateau":
        left = invariant_subspace_unstable(fam.limit(0.0, -1), fam.hyper_tol)
        right = invariant_subspace_stable(fam.limit(0.0, +1), fam.hyper_tol)
    elif boundary == "dirichlet":
        D = LagrangianSubspace(np.vstack([np.zeros((n, n)), np.eye(n)]))
        left = right = D
    else:
        raise ValueError(f"unknown boundary choice {boundary!r}")
    return DiscretizedPath(fam, T_num, N, left, right)


@dataclass
class Window:
    lam_from: float
    lam_to: float
    radius: float
    count_from: int
    count_to: int


@dataclass
class DiscreteFlow:
    sfl: int
    windows: list[Window]
    lambdas: np.ndarray
    eigenvalues: list[np.ndarray]

    @property
    def crossing_intervals(self) -> list[tuple[float, float, int]]:
        return [(w.lam_from, w.lam_to, w.count_to - w.count_from) for w in self.windows if w.count_to != w.count_from]


def _pick_radius(Ea: np.ndarray, Eb: np.ndarray, move: float, cap: float, floor: float) -> float | None:
    # midpoint of the widest gap in {0} ∪ |eigs| ∪ {cap} whose half-width beats the movement bound
    marks = np.unique(np.concatenate([[0.0, cap], np.abs(Ea), np.abs(Eb)]))
    marks = marks[marks <= cap]
    gaps = np.diff(marks)
    for i in np.argsort(gaps)[::-1]:
        a = 0.5 * (marks[i] + marks[i + 1])
        if 0.5 * gaps[i] > move and floor <= a <= cap - move:
            return float(a)
    return None


def discretized_flow(
    fam: HamiltonianFamily,
    disc: DiscretizedPath | None = None,
    lambda_steps: int = 200,
    window_cap: float = WINDOW_CAP,
    window_floor: float = WINDOW_FLOOR,
    backend: str | None = None,
) -> DiscreteFlow:
    """Spectral flow of the discretized path by windowed eigenvalue counting.

    Over each parameter subinterval a window radius ``a`` is chosen so that no
    eigenvalue can reach ``+-a`` (checked with the Weyl bound
    ``|mu_k(b) - mu_k(a)| <= ||A_b - A_a||``, inflated by ``MOVE_SAFETY``); the
    subinterval contributes the change in the number of eigenvalues in
    ``[0, a]``. Subintervals without a valid window are bisected.
    """
    disc = disc or default_discretization(fam)
    lams = np.linspace(0.0, 1.0, int(lambda_steps) + 1)
    blocks = {}
    eigs = {}

    def at(lam):
        if lam not in eigs:
            blocks[lam] = disc.block_tridiagonal(lam)
            eigs[lam] = disc.eigenvalues(lam, window_cap, backend)
        return eigs[lam]

    windows: list[Window] = []

    def process(a, b, depth):
        Ea, Eb = at(a), at(b)
        move = MOVE_SAFETY * block_inf_norm(blocks[b][0] - blocks[a][0], blocks[b][1] - blocks[a][1])
        radius = _pick_radius(Ea, Eb, move, window_cap, window_floor)
        if radius is None:
            if depth >= MAX_BISECTIONS:
                raise ConvergenceError(
                    f"no admissible spectral window on [{a:.10g}, {b:.10g}]; increase lambda_steps"
                )
            m = 0.5 * (a + b)
            process(a, m, depth + 1)
            process(m, b, depth + 1)
            return
        ca = int(np.count_nonzero((Ea >= 0) & (Ea <= radius)))
        cb = int(np.count_nonzero((Eb >= 0) & (Eb <= radius)))
        windows.append(Window(a, b, radius, ca, cb))

    for a, b in zip(lams[:-1], lams[1:]):
        process(float(a), float(b), 0)
    return DiscreteFlow(
        sum(w.count_to - w.count_from for w in windows), windows, lams, [eigs[float(x)] for x in lams]
    )


def spectral_flow_discretized(
    fam: HamiltonianFamily, disc: DiscretizedPath | None = None, lambda_steps: int = 200, **kwargs
) -> int:
    return discretized_flow(fam, disc, lambda_steps, **kwargs).sfl
