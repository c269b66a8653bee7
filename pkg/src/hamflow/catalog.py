"""Built-in families with independently known answers."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .errors import SchemaError
from .hamsys import HamiltonianFamily


def sech2(t):
    """``sech(t)**2`` without overflow for large ``|t|``."""
    e = np.exp(-2.0 * np.abs(t))
    return 4.0 * e / (1.0 + e) ** 2


def plateau_time(amplitude: float, tol: float) -> float:
    """Smallest ``T`` with ``amplitude * sech(T)**2 <= tol``."""
    if amplitude <= tol:
        return 0.0
    T = 0.5 * math.log(4.0 * amplitude / tol)
    while amplitude * float(sech2(T)) > tol:
        T += 1e-3
    return T


def schrodinger_family(depth: float, lam_a: float, lam_b: float, plateau_tol: float = 1e-10, name: str = "poschl_teller"):
    """First-order form of ``-q'' - depth sech^2(t) q = lam q``.

    ``u = (q, q')`` and ``S = [[V(t) - lam, 0], [0, -1]]`` with
    ``lam = lam_a + (lam_b - lam_a) s`` for ``s`` in ``[0, 1]``. Bound states sit
    at ``lam = -(l - j)^2`` for ``depth = l (l + 1)``.
    """
    if lam_a >= 0 or lam_b >= 0:
        raise SchemaError("the lambda interval must lie in (-inf, 0) for hyperbolic limits")
    span = lam_b - lam_a

    def S(s, t):
        t = np.atleast_1d(t)
        out = np.zeros((len(t), 2, 2))
        out[:, 0, 0] = -depth * sech2(t) - (lam_a + span * s)
        out[:, 1, 1] = -1.0
        return out

    def S_dot(s, t):
        out = np.zeros((len(np.atleast_1d(t)), 2, 2))
        out[:, 0, 0] = -span
        return out

    def limit(s):
        return np.diag([-(lam_a + span * s), -1.0])

    return HamiltonianFamily(
        n=1,
        S=S,
        S_plus_inf=limit,
        S_minus_inf=limit,
        T_plateau=plateau_time(depth, plateau_tol),
        S_dot=S_dot,
        plateau_tol=plateau_tol,
        name=name,
        lambda_range=(lam_a, lam_b),
    )


def poschl_teller(depth: float = 2.0, lam=(-2.0, -0.5), plateau_tol: float = 1e-10):
    return schrodinger_family(depth, lam[0], lam[1], plateau_tol, "poschl_teller")


def poschl_teller_deep(depth: float = 6.0, lam=(-5.0, -0.5), plateau_tol: float = 1e-10):
    return schrodinger_family(depth, lam[0], lam[1], plateau_tol, "poschl_teller_deep")


def constant_hyperbolic(n: int = 1, lam=(0.0, 1.0)):
    """Autonomous family ``S = diag((1 + mu) I, -I)``, ``mu`` in ``lam``; never a crossing."""
    a, b = lam
    if min(a, b) <= -1:
        raise SchemaError("constant_hyperbolic needs 1 + lambda > 0")
    n = int(n)

    def limit(s):
        return np.diag(np.r_[np.full(n, 1.0 + a + (b - a) * s), -np.ones(n)])

    def S(s, t):
        return np.broadcast_to(limit(s), (len(np.atleast_1d(t)), 2 * n, 2 * n)).copy()

    def S_dot(s, t):
        return np.broadcast_to(np.diag(np.r_[np.full(n, b - a), np.zeros(n)]), (len(np.atleast_1d(t)), 2 * n, 2 * n)).copy()

    return HamiltonianFamily(n, S, limit, limit, 0.0, S_dot, 1e-10, "constant_hyperbolic", (a, b))


def rotating_boundary(depth: float = 2.0, center: float = 0.5, plateau_tol: float = 1e-10):
    """Schrödinger block frozen at its ground state plus ``(s - center)^3 I``.

    The operator path is ``A_0 + (s - center)^3`` with ``ker A_0`` spanned by the
    ground state: one crossing at ``s = center`` where ``dS/ds`` vanishes, so the
    crossing form is zero there while the spectral flow is +1.
    """
    kappa2 = ((math.sqrt(1.0 + 4.0 * depth) - 1.0) / 2.0) ** 2
    I2 = np.eye(2)

    def S(s, t):
        t = np.atleast_1d(t)
        out = np.zeros((len(t), 2, 2))
        out[:, 0, 0] = -depth * sech2(t) + kappa2
        out[:, 1, 1] = -1.0
        return out + (s - center) ** 3 * I2

    def S_dot(s, t):
        return np.broadcast_to(3.0 * (s - center) ** 2 * I2, (len(np.atleast_1d(t)), 2, 2)).copy()

    def limit(s):
        return np.diag([kappa2, -1.0]) + (s - center) ** 3 * I2

    return HamiltonianFamily(
        1, S, limit, limit, plateau_time(depth, plateau_tol), S_dot, plateau_tol, "rotating_boundary", (0.0, 1.0)
    )


def block_direct_sum(depth_a: float = 2.0, depth_b: float = 2.0, lam=(-2.0, -0.5)):
    """``n = 2`` direct sum of two Schrödinger blocks on a shared parameter interval."""
    fa = schrodinger_family(depth_a, lam[0], lam[1])
    fb = schrodinger_family(depth_b, lam[0], lam[1])
    return replace(fa.direct_sum(fb), name="block_direct_sum")


CATALOG = {
    "constant_hyperbolic": constant_hyperbolic,
    "poschl_teller": poschl_teller,
    "poschl_teller_deep": poschl_teller_deep,
    "rotating_boundary": rotating_boundary,
    "block_direct_sum": block_direct_sum,
}


def build(entry: str, **params) -> HamiltonianFamily:
    try:
        factory = CATALOG[entry]
    except KeyError:
        raise SchemaError(f"unknown catalog entry {entry!r}; known: {', '.join(sorted(CATALOG))}") from None
    if "lambda" in params:
        params["lam"] = params.pop("lambda")
    try:
        return factory(**params)
    except TypeError as exc:
        raise SchemaError(f"bad parameters for {entry!r}: {exc}") from None
