"""Hot loops of the linear flow ``u' = J S(t) u``.

Each step is the Cayley map ``(I - h/2 K)^{-1} (I + h/2 K)`` of ``K = J S`` at the
step midpoint, i.e. one implicit-midpoint step, which is exactly symplectic.

Two interchangeable backends are provided: a numba-compiled loop and a pure
numpy version. ``HAMFLOW_NO_NUMBA=1`` in the environment (or a missing numba)
selects numpy.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        return decorator


def _env_disabled() -> bool:
    return os.environ.get("HAMFLOW_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


BACKEND = "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"

# fourth-order symmetric triple jump built from implicit-midpoint substeps
_CBRT2 = 2.0 ** (1.0 / 3.0)
TRIPLE_JUMP = np.array([1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2)])


def substep_schedule(t_from: float, t_to: float, n_steps: int):
    """Substep sizes and midpoint times for ``n_steps`` triple-jump steps.

    Returns ``(hs, t_mid)``, each of length ``3 * n_steps``.
    """
    H = (t_to - t_from) / n_steps
    starts = t_from + H * np.arange(n_steps)
    offsets = np.concatenate(([0.0], np.cumsum(TRIPLE_JUMP)[:-1]))
    hs = np.tile(TRIPLE_JUMP * H, n_steps)
    t_mid = (starts[:, None] + H * (offsets + 0.5 * TRIPLE_JUMP)[None, :]).ravel()
    return hs, t_mid


@njit(cache=True)
def _propagate_numba(K, hs, F0, J, sub, leg, renorm):
    m = K.shape[0]
    d = F0.shape[0]
    k = F0.shape[1]
    nsteps = m // sub
    frames = np.empty((nsteps + 1, d, k))
    Rs = np.zeros((nsteps + 1, k, k))
    eye_d = np.eye(d)
    eye_k = np.eye(k)
    F = F0.copy()
    frames[0] = F
    Rs[0] = eye_k
    Phi = eye_d.copy()
    max_defect = 0.0
    for s in range(nsteps):
        for j in range(sub):
            idx = s * sub + j
            half = 0.5 * hs[idx]
            A = eye_d - half * K[idx]
            B = eye_d + half * K[idx]
            C = np.ascontiguousarray(np.linalg.solve(A, B))
            F = C @ F
            Phi = C @ Phi
        Rs[s + 1] = eye_k
        if (s + 1) % leg == 0 or s == nsteps - 1:
            D = Phi.T @ J @ Phi - J
            defect = np.max(np.abs(D))
            if defect > max_defect:
                max_defect = defect
            Phi = eye_d.copy()
            if renorm:
                Q, R = np.linalg.qr(F)
                for c in range(k):
                    if R[c, c] < 0.0:
                        Q[:, c] = -Q[:, c]
                        R[c, :] = -R[c, :]
                F = np.ascontiguousarray(Q)
                Rs[s + 1] = R
        frames[s + 1] = F
    return frames, Rs, max_defect


def _propagate_numpy(K, hs, F0, J, sub, leg, renorm):
    m, d, _ = K.shape
    k = F0.shape[1]
    nsteps = m // sub
    eye_d = np.eye(d)
    half = 0.5 * hs[:, None, None]
    C = np.linalg.solve(eye_d - half * K, eye_d + half * K)
    frames = np.empty((nsteps + 1, d, k))
    Rs = np.broadcast_to(np.eye(k), (nsteps + 1, k, k)).copy()
    F = F0.copy()
    frames[0] = F
    Phi = eye_d
    max_defect = 0.0
    for s in range(nsteps):
        step = C[s * sub]
        for j in range(1, sub):
            step = C[s * sub + j] @ step
        F = step @ F
        Phi = step @ Phi
        if (s + 1) % leg == 0 or s == nsteps - 1:
            max_defect = max(max_defect, float(np.max(np.abs(Phi.T @ J @ Phi - J))))
            Phi = eye_d
            if renorm:
                Q, R = np.linalg.qr(F)
                signs = np.where(np.diag(R) < 0.0, -1.0, 1.0)
                F = Q * signs
                Rs[s + 1] = R * signs[:, None]
        frames[s + 1] = F
    return frames, Rs, max_defect


def propagate(K, hs, F0, J, sub=3, leg=10, renorm=True, backend=None):
    """Carry the frame ``F0`` through the substeps ``(K[i], hs[i])``.

    Parameters
    ----------
    K : (m, d, d) array
        ``J S`` at each substep midpoint.
    hs : (m,) array
        Signed substep sizes; ``m`` must be a multiple of ``sub``.
    F0 : (d, k) array
        Initial frame.
    J : (d, d) array
        Symplectic matrix used for the defect check.
    sub : int
        Substeps per recorded step.
    leg : int
        Recorded steps per leg. The symplecticity defect of each leg's transfer
        matrix is measured and, with ``renorm``, the frame is re-orthonormalized.
    renorm : bool
        QR re-orthonormalization at leg ends and at the final step.

    Returns
    -------
    frames : (nsteps + 1, d, k) array
    Rs : (nsteps + 1, k, k) array
        Triangular factor of the QR applied when reaching each step; identity
        where no re-orthonormalization happened.
    max_defect : float
        Largest ``max|Phi^T J Phi - J|`` over all legs.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    hs = np.ascontiguousarray(hs, dtype=np.float64)
    F0 = np.ascontiguousarray(F0, dtype=np.float64)
    J = np.ascontiguousarray(J, dtype=np.float64)
    if K.shape[0] % sub:
        raise ValueError("substep count must be a multiple of sub")
    backend = backend or BACKEND
    if backend == "numba":
        return _propagate_numba(K, hs, F0, J, int(sub), int(leg), bool(renorm))
    return _propagate_numpy(K, hs, F0, J, int(sub), int(leg), bool(renorm))



@njit(cache=True)
def _count_below_numba(band, sigma):
    kd = band.shape[0] - 1
    size = band.shape[1]
    W = band.copy()
    scale = 0.0
    for j in range(size):
        W[0, j] -= sigma
        scale = max(scale, abs(W[0, j]))
    tiny = 1e-14 * max(scale, 1.0)
    count = 0
    for j in range(size):
        d = W[0, j]
        if d == 0.0:
            d = tiny
        if d < 0.0:
            count += 1
        for i in range(1, min(kd, size - 1 - j) + 1):
            l = W[i, j] / d
            if l == 0.0:
                continue
            for r in range(0, kd - i + 1):
                W[r, j + i] -= W[i + r, j] * l
    return count


def _count_below_numpy(band, sigma):
    kd = band.shape[0] - 1
    size = band.shape[1]
    W = band.copy()
    W[0] -= sigma
    tiny = 1e-14 * max(np.abs(W[0]).max(), 1.0)
    count = 0
    for j in range(size):
        d = W[0, j] if W[0, j] != 0.0 else tiny
        count += d < 0.0
        m = min(kd, size - 1 - j)
        if m == 0:
            continue
        col = W[1 : m + 1, j]
        l = col / d
        for i in range(1, m + 1):
            W[: kd - i + 1, j + i] -= W[i : kd + 1, j] * l[i - 1]
    return int(count)


def count_below(band, sigma, backend=None) -> int:
    """Number of eigenvalues below ``sigma`` of a symmetric banded matrix.

    Sylvester's law of inertia on the unpivoted ``LDL^T`` factorization of
    ``A - sigma I`` (for a tridiagonal matrix this is the Sturm count). Exact
    zero pivots are nudged to a tiny positive value.

    Parameters
    ----------
    band : (kd + 1, size) array
        Lower band storage, ``band[d, j] = A[j + d, j]``.
    sigma : float
        Shift.
    """
    band = np.ascontiguousarray(band, dtype=np.float64)
    if (backend or BACKEND) == "numba":
        return int(_count_below_numba(band, float(sigma)))
    return _count_below_numpy(band, float(sigma))


def bisect_eigenvalues(band, lo, hi, tol=1e-11, backend=None) -> np.ndarray:
    """Eigenvalues in ``[lo, hi)`` located to ``tol`` by bisection on :func:`count_below`."""
    c_lo = count_below(band, lo, backend)
    c_hi = count_below(band, hi, backend)
    found = []
    stack = [(lo, hi, c_lo, c_hi)]
    while stack:
        a, b, ca, cb = stack.pop()
        if cb == ca:
            continue
        if b - a <= tol:
            found.extend([0.5 * (a + b)] * (cb - ca))
            continue
        m = 0.5 * (a + b)
        cm = count_below(band, m, backend)
        stack.append((a, m, ca, cm))
        stack.append((m, b, cm, cb))
    return np.sort(np.array(found, dtype=np.float64))
