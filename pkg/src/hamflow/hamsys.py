"""Linear Hamiltonian families ``J u' + S_lam(t) u = 0`` on the real line.

Stable and unstable subspaces at a base time are obtained by carrying the
invariant subspaces of ``J S_lam(+-inf)`` in from the plateau time, where the
family is treated as constant, with a symplectic one-step method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import block_diag, schur

from . import kernels
from .errors import AssumptionError, ConvergenceError, NoCrossingError, PreconditionError
from .symplectic import (
    INTERSECTION_TOL,
    LagrangianPath,
    LagrangianSubspace,
    intersection,
    smallest_sine,
    standard_J,
)
from .qforms import QuadraticForm

HYPER_TOL = 1e-8
SDOT_STEP = 1e-5
SDOT_RTOL = 1e-4
DECAY_TOL = 1e-10
QUAD_TOL = 1e-6


def _as_times(t) -> np.ndarray:
    return np.atleast_1d(np.asarray(t, dtype=float))


@dataclass(frozen=True, eq=False)
class HamiltonianFamily:
    """Symmetric matrices ``S(lam, t)``, ``lam`` in ``[0, 1]``, with limits at ``t -> +-inf``.

    ``S(lam, t)`` must accept an array of times and return an ``(m, 2n, 2n)``
    array. Beyond ``|t| >= T_plateau`` the family is replaced by its limits.
    ``lambda_range`` records the physical parameter interval mapped affinely
    onto ``[0, 1]`` (for reporting only). ``hyper_tol`` is the smallest
    admissible ``|Re mu|`` over the spectra of ``J S(+-inf)``.
    """

    n: int
    S: Callable[[float, np.ndarray], np.ndarray]
    S_plus_inf: Callable[[float], np.ndarray]
    S_minus_inf: Callable[[float], np.ndarray]
    T_plateau: float
    S_dot: Callable[[float, np.ndarray], np.ndarray] | None = None
    plateau_tol: float = 1e-10
    name: str = "family"
    lambda_range: tuple[float, float] = (0.0, 1.0)
    hyper_tol: float = HYPER_TOL

    def matrices(self, lam: float, t) -> np.ndarray:
        t = _as_times(t)
        out = np.array(self.S(lam, t), dtype=float).reshape(len(t), 2 * self.n, 2 * self.n)
        hi = t >= self.T_plateau
        lo = t <= -self.T_plateau
        if hi.any():
            out[hi] = self.S_plus_inf(lam)
        if lo.any():
            out[lo] = self.S_minus_inf(lam)
        return out

    def limit(self, lam: float, side: int) -> np.ndarray:
        M = self.S_plus_inf(lam) if side > 0 else self.S_minus_inf(lam)
        return np.asarray(M, dtype=float)

    def derivative(self, lam: float, t) -> np.ndarray:
        """``dS/dlam``: analytic when supplied, else a Richardson-guarded central difference."""
        t = _as_times(t)
        if self.S_dot is not None:
            return np.array(self.S_dot(lam, t), dtype=float).reshape(len(t), 2 * self.n, 2 * self.n)
        h = SDOT_STEP
        coarse = (self.matrices(lam + h, t) - self.matrices(lam - h, t)) / (2 * h)
        fine = (self.matrices(lam + h / 2, t) - self.matrices(lam - h / 2, t)) / h
        err = np.max(np.abs(coarse - fine))
        if err > SDOT_RTOL * max(np.max(np.abs(fine)), 1e-8) + 1e-9:
            raise ConvergenceError(f"dS/dlam difference quotients disagree at lambda={lam:.10g}")
        return (4.0 * fine - coarse) / 3.0

    def physical(self, lam: float) -> float:
        a, b = self.lambda_range
        return a + (b - a) * lam

    def shifted(self, delta: float) -> HamiltonianFamily:
        """``S + delta I``; the operator path shifts by ``delta`` times the identity."""
        E = delta * np.eye(2 * self.n)
        return replace(
            self,
            S=lambda lam, t: self.matrices(lam, t) + E,
            S_plus_inf=lambda lam: self.limit(lam, +1) + E,
            S_minus_inf=lambda lam: self.limit(lam, -1) + E,
            S_dot=self.derivative,
            name=f"{self.name}+{delta:g}I",
        )

    def reversed(self) -> HamiltonianFamily:
        a, b = self.lambda_range
        return replace(
            self,
            S=lambda lam, t: self.matrices(1.0 - lam, t),
            S_plus_inf=lambda lam: self.limit(1.0 - lam, +1),
            S_minus_inf=lambda lam: self.limit(1.0 - lam, -1),
            S_dot=lambda lam, t: -self.derivative(1.0 - lam, t),
            name=f"{self.name}[reversed]",
            lambda_range=(b, a),
        )

    def restricted(self, a: float, b: float) -> HamiltonianFamily:
        """The sub-path on ``[a, b]`` reparametrized over ``[0, 1]``."""
        return replace(
            self,
            S=lambda lam, t: self.matrices(a + (b - a) * lam, t),
            S_plus_inf=lambda lam: self.limit(a + (b - a) * lam, +1),
            S_minus_inf=lambda lam: self.limit(a + (b - a) * lam, -1),
            S_dot=lambda lam, t: (b - a) * self.derivative(a + (b - a) * lam, t),
            name=f"{self.name}[{a:g},{b:g}]",
            lambda_range=(self.physical(a), self.physical(b)),
        )

    def direct_sum(self, other: HamiltonianFamily) -> HamiltonianFamily:
        """Decoupled system on ``R^{2(n1+n2)}`` in the ordering ``(q1, q2, p1, p2)``."""
        n1, n2 = self.n, other.n
        n = n1 + n2
        order = np.r_[0:n1, 2 * n1 : 2 * n1 + n2, n1 : 2 * n1, 2 * n1 + n2 : 2 * n]
        P = np.eye(2 * n)[order]

        def embed(A, B):
            M = np.zeros(A.shape[:-2] + (2 * n, 2 * n))
            M[..., : 2 * n1, : 2 * n1] = A
            M[..., 2 * n1 :, 2 * n1 :] = B
            return P @ M @ P.T

        return HamiltonianFamily(
            n=n,
            S=lambda lam, t: embed(self.matrices(lam, t), other.matrices(lam, t)),
            S_plus_inf=lambda lam: embed(self.limit(lam, +1), other.limit(lam, +1)),
            S_minus_inf=lambda lam: embed(self.limit(lam, -1), other.limit(lam, -1)),
            T_plateau=max(self.T_plateau, other.T_plateau),
            S_dot=lambda lam, t: embed(self.derivative(lam, t), other.derivative(lam, t)),
            plateau_tol=max(self.plateau_tol, other.plateau_tol),
            name=f"{self.name}(+){other.name}",
            lambda_range=self.lambda_range,
            hyper_tol=max(self.hyper_tol, other.hyper_tol),
        )


def validate_family(fam: HamiltonianFamily, n_lambda: int = 11, n_t: int = 41) -> dict:
    """Check symmetry, the plateau bound and A1 on a sample grid.

    Returns the sampled bound ``C1`` on ``||dS/dlam||`` and the smallest
    hyperbolicity gap of the limits.
    """
    lams = np.linspace(0.0, 1.0, n_lambda)
    T = max(fam.T_plateau, 1.0)
    ts = np.linspace(-1.5 * T, 1.5 * T, n_t)
    C1 = 0.0
    min_gap = np.inf
    for lam in lams:
        S = np.array(fam.S(lam, ts), dtype=float).reshape(len(ts), 2 * fam.n, 2 * fam.n)
        asym = np.max(np.abs(S - np.swapaxes(S, 1, 2)), axis=(1, 2))
        scale = np.max(np.abs(S), axis=(1, 2))
        if np.any(asym > 1e-12 * np.maximum(scale, 1e-300)):
            i = int(np.argmax(asym - 1e-12 * scale))
            raise PreconditionError(f"S is not symmetric at lambda={lam:g}, t={ts[i]:g}")
        for side in (+1, -1):
            far = side * fam.T_plateau * np.array([1.0, 1.5, 2.0, 4.0])
            raw = np.array(fam.S(lam, far), dtype=float).reshape(len(far), 2 * fam.n, 2 * fam.n)
            dev = np.max(np.linalg.norm(raw - fam.limit(lam, side), ord=2, axis=(1, 2)))
            slack = 1e-6 * fam.plateau_tol + 4 * np.finfo(float).eps * np.max(np.abs(raw))
            if dev > fam.plateau_tol + slack:
                raise PreconditionError(
                    f"plateau bound violated at lambda={lam:g}: deviation {dev:.3e} > {fam.plateau_tol:g}"
                )
            ok, gap = check_hyperbolic(fam.limit(lam, side), fam.hyper_tol)
            if not ok:
                raise AssumptionError("A1", lam, f"J S({'+' if side > 0 else '-'}inf) is not hyperbolic")
            min_gap = min(min_gap, gap)
        C1 = max(C1, float(np.max(np.linalg.norm(fam.derivative(lam, ts), ord=2, axis=(1, 2)))))
    return {"C1": C1, "min_gap": float(min_gap)}


def check_hyperbolic(M, hyper_tol: float = HYPER_TOL) -> tuple[bool, float]:
    """Whether ``J M`` has no eigenvalue on the imaginary axis; ``gap = min |Re mu|``."""
    M = np.asarray(M, dtype=float)
    mu = np.linalg.eigvals(standard_J(M.shape[0] // 2) @ M)
    gap = float(np.min(np.abs(mu.real)))
    return gap > hyper_tol, gap


def _invariant_subspace(M, stable: bool, hyper_tol: float) -> LagrangianSubspace:
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // 2
    ok, gap = check_hyperbolic(M, hyper_tol)
    if not ok:
        raise AssumptionError("A1", None, f"J S has eigenvalues on the imaginary axis (gap {gap:.3e})")
    _, Z, sdim = schur(standard_J(n) @ M, output="real", sort="lhp" if stable else "rhp")
    if sdim != n:
        raise ConvergenceError(f"ordered Schur form split {sdim} eigenvalues, expected {n} (gap {gap:.3e})")
    return LagrangianSubspace(Z[:, :n])


def invariant_subspace_stable(M, hyper_tol: float = HYPER_TOL) -> LagrangianSubspace:
    """Invariant subspace of ``J M`` for the eigenvalues with negative real part."""
    return _invariant_subspace(M, True, hyper_tol)


def invariant_subspace_unstable(M, hyper_tol: float = HYPER_TOL) -> LagrangianSubspace:
    """Invariant subspace of ``J M`` for the eigenvalues with positive real part."""
    return _invariant_subspace(M, False, hyper_tol)


@dataclass
class Flow:
    times: np.ndarray
    frames: np.ndarray
    Rs: np.ndarray
    defect: float


@dataclass
class FlowSolver:
    """Fundamental-solution integrator for ``J Psi' + S Psi = 0``.

    Fourth-order triple-jump composition of implicit-midpoint steps of size
    about ``step``; frames are re-orthonormalized every ``leg`` steps, and the
    symplecticity defect of each leg must stay below ``defect_tol`` (the step is
    halved otherwise).
    """

    step: float = 0.01
    leg: int = 10
    defect_tol: float = 1e-7
    max_refinements: int = 4
    backend: str | None = None
    max_defect: float = field(default=0.0, compare=False)

    def run(
        self,
        fam: HamiltonianFamily,
        lam: float,
        F0: np.ndarray,
        t_from: float,
        t_to: float,
        renorm: bool = True,
        n_steps: int | None = None,
    ) -> Flow:
        F0 = np.asarray(F0, dtype=float)
        if t_from == t_to:
            k = F0.shape[1]
            return Flow(np.array([t_from]), F0[None].copy(), np.eye(k)[None], 0.0)
        J = standard_J(fam.n)
        if n_steps is None:
            n_steps = max(1, math.ceil(abs(t_to - t_from) / self.step))
        for _ in range(self.max_refinements + 1):
            hs, t_mid = kernels.substep_schedule(t_from, t_to, n_steps)
            K = J @ fam.matrices(lam, t_mid)
            frames, Rs, defect = kernels.propagate(K, hs, F0, J, 3, self.leg, renorm, self.backend)
            if defect <= self.defect_tol:
                self.max_defect = max(self.max_defect, defect)
                return Flow(np.linspace(t_from, t_to, n_steps + 1), frames, Rs, defect)
            n_steps *= 2
        raise ConvergenceError(
            f"symplecticity defect {defect:.3e} exceeds {self.defect_tol:g}; reduce the step below {self.step:g}"
        )


DEFAULT_SOLVER = FlowSolver()


def fundamental_matrix(fam: HamiltonianFamily, lam: float, t0: float, t: float, solver: FlowSolver | None = None):
    """``Psi_(lam, t0)(t)``, the solution of ``J Psi' + S Psi = 0`` with ``Psi(t0) = I``."""
    solver = solver or DEFAULT_SOLVER
    flow = solver.run(fam, lam, np.eye(2 * fam.n), t0, t, renorm=False)
    return flow.frames[-1]


def propagate_lagrangian(
    fam: HamiltonianFamily,
    lam: float,
    L: LagrangianSubspace,
    t_from: float,
    t_to: float,
    solver: FlowSolver | None = None,
) -> LagrangianSubspace:
    """Image of ``L`` under the flow from ``t_from`` to ``t_to``."""
    solver = solver or DEFAULT_SOLVER
    flow = solver.run(fam, lam, L.frame, t_from, t_to)
    return LagrangianSubspace(flow.frames[-1])


def stable_subspace(fam: HamiltonianFamily, lam: float, t0: float = 0.0, solver: FlowSolver | None = None):
    """``E^s_lam(t0)``: the stable subspace at ``+inf`` carried back from the plateau."""
    start = max(fam.T_plateau, t0)
    E = invariant_subspace_stable(fam.limit(lam, +1), fam.hyper_tol)
    return propagate_lagrangian(fam, lam, E, start, t0, solver)


def unstable_subspace(fam: HamiltonianFamily, lam: float, t0: float = 0.0, solver: FlowSolver | None = None):
    """``E^u_lam(t0)``: the unstable subspace at ``-inf`` carried forward from the plateau."""
    start = min(-fam.T_plateau, t0)
    E = invariant_subspace_unstable(fam.limit(lam, -1), fam.hyper_tol)
    return propagate_lagrangian(fam, lam, E, start, t0, solver)


def unstable_path(fam: HamiltonianFamily, t0: float = 0.0, solver: FlowSolver | None = None) -> LagrangianPath:
    return LagrangianPath(lambda lam: unstable_subspace(fam, lam, t0, solver))


def stable_path(fam: HamiltonianFamily, t0: float = 0.0, solver: FlowSolver | None = None) -> LagrangianPath:
    return LagrangianPath(lambda lam: stable_subspace(fam, lam, t0, solver))


class IntersectionDetector:
    """Smallest principal-angle sine between ``E^u_lam(t0)`` and ``E^s_lam(t0)``."""

    def __init__(self, fam: HamiltonianFamily, t0: float = 0.0, solver: FlowSolver | None = None):
        self.unstable = unstable_path(fam, t0, solver)
        self.stable = stable_path(fam, t0, solver)

    def __call__(self, lam: float) -> float:
        return smallest_sine(self.unstable(lam), self.stable(lam))


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """L2-orthonormal basis of the kernel of ``J d/dt + S_lam0`` sampled on ``[-eta, eta]``.

    ``samples`` has shape ``(k, len(t), 2n)``; ``vectors`` holds the values at
    ``t = 0`` as columns.
    """

    lambda0: float
    t: np.ndarray
    samples: np.ndarray
    eta: float
    residual: float
    tail: float

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        return self.samples[:, len(self.t) // 2, :].T


def _back_substitute(flow: Flow, A_end: np.ndarray) -> np.ndarray:
    # coefficients along the recorded frames of the solutions through frame[-1] @ A_end
    m = len(flow.times) - 1
    coeff = np.empty((m + 1,) + A_end.shape)
    coeff[m] = A_end
    for i in range(m - 1, -1, -1):
        R = flow.Rs[i + 1]
        coeff[i] = coeff[i + 1] if np.array_equal(R, np.eye(len(R))) else np.linalg.solve(R, coeff[i + 1])
    return np.einsum("idk,ikj->jid", flow.frames, coeff)


def _ode_residual(fam: HamiltonianFamily, lam: float, t: np.ndarray, u: np.ndarray) -> float:
    H = t[1] - t[0]
    du = (-u[:, 4:] + 8 * u[:, 3:-1] - 8 * u[:, 1:-3] + u[:, :-4]) / (12 * H)
    J = standard_J(fam.n)
    S = fam.matrices(lam, t[2:-2])
    r = du @ J.T + np.einsum("tab,ktb->kta", S, u[:, 2:-2])
    return float(np.max(np.linalg.norm(r, axis=-1)))


def kernel(
    fam: HamiltonianFamily,
    lambda0: float,
    eta: float | None = None,
    tol: float = INTERSECTION_TOL,
    solver: FlowSolver | None = None,
    decay_tol: float = DECAY_TOL,
    eta_max: float | None = None,
) -> KernelBasis:
    """Homoclinic solutions at ``lambda0``, L2-orthonormalized on ``[-eta, eta]``.

    Each intersection direction ``v`` of ``E^u(0)`` and ``E^s(0)`` is continued to
    ``t < 0`` along the unstable frames and to ``t > 0`` along the stable frames,
    so that only decaying directions are ever integrated. ``eta`` grows from
    ``max(eta, T_plateau)`` until the normalized tails satisfy
    ``|u(+-eta)|^2 <= decay_tol``.
    """
    solver = solver or DEFAULT_SOLVER
    eta = max(fam.T_plateau, 1.0, eta or 0.0)
    eta_max = eta_max or 8.0 * eta
    while True:
        M = 2 * math.ceil(eta / (2 * solver.step))
        Es = invariant_subspace_stable(fam.limit(lambda0, +1), fam.hyper_tol)
        Eu = invariant_subspace_unstable(fam.limit(lambda0, -1), fam.hyper_tol)
        right = solver.run(fam, lambda0, Es.frame, eta, 0.0, n_steps=M)
        left = solver.run(fam, lambda0, Eu.frame, -eta, 0.0, n_steps=M)
        Fs, Fu = right.frames[-1], left.frames[-1]
        X = intersection(Fu, Fs, tol)
        if X.shape[1] == 0:
            raise NoCrossingError(f"no crossing at lambda={lambda0:.10g}")
        u_left = _back_substitute(left, Fu.T @ X)
        u_right = _back_substitute(right, Fs.T @ X)[:, ::-1]
        mid = 0.5 * (u_left[:, -1] + u_right[:, 0])
        u = np.concatenate([u_left[:, :-1], mid[:, None], u_right[:, 1:]], axis=1)
        t = np.linspace(-eta, eta, 2 * M + 1)
        G = simpson(np.einsum("itd,jtd->ijt", u, u), x=t, axis=-1)
        Linv = np.linalg.inv(np.linalg.cholesky(0.5 * (G + G.T)))
        u = np.einsum("ij,jtd->itd", Linv, u)
        tail = float(np.max(np.sum(u[:, [0, -1]] ** 2, axis=-1)))
        if tail <= decay_tol:
            break
        if eta >= eta_max:
            raise ConvergenceError(f"kernel tails still {tail:.3e} at eta={eta:g}")
        eta = min(1.25 * eta, eta_max)
    residual = _ode_residual(fam, lambda0, t, u)
    return KernelBasis(float(lambda0), t, u, float(eta), residual, tail)


def operator_crossing_form(fam: HamiltonianFamily, kb: KernelBasis, quad_tol: float = QUAD_TOL) -> QuadraticForm:
    """Matrix of ``u -> int <dS/dlam u, u> dt`` on the kernel basis.

    Composite Simpson on the kernel grid, checked against the same rule on
    every other node.
    """
    Sdot = fam.derivative(kb.lambda0, kb.t)
    integrand = np.einsum("itd,tde,jte->ijt", kb.samples, Sdot, kb.samples)
    full = simpson(integrand, x=kb.t, axis=-1)
    half = simpson(integrand[..., ::2], x=kb.t[::2], axis=-1)
    if np.max(np.abs(full - half)) > quad_tol:
        raise ConvergenceError(f"crossing-form quadrature not converged at lambda={kb.lambda0:.10g}")
    return QuadraticForm.from_matrix(full, "ker A")
