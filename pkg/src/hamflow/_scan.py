"""Grid scan plus local refinement for zeros of a non-negative detector."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

DETECT_TOL = 1e-7
CLUSTER_TOL = 1e-7
XTOL = 1e-10


class ClusterWarning(UserWarning):
    pass


@dataclass
class Scan:
    grid: np.ndarray
    values: np.ndarray
    locations: list[float] = field(default_factory=list)
    minima: list[float] = field(default_factory=list)
    clustered: bool = False


def scan_zeros(detector, grid_size: int, detect_tol: float = DETECT_TOL, xtol: float = XTOL) -> Scan:
    """Find the zeros of ``detector`` on ``[0, 1]``.

    The detector is sampled on ``grid_size + 1`` uniform nodes; every interior
    local minimum is refined by bounded Brent minimization over its two
    neighbouring cells and kept if the refined value is below ``detect_tol``.
    Zeros closer than ``CLUSTER_TOL`` are merged with a ``ClusterWarning``.
    """
    grid = np.linspace(0.0, 1.0, int(grid_size) + 1)
    values = np.array([detector(x) for x in grid])
    scan = Scan(grid, values)
    for j in range(1, len(grid) - 1):
        if values[j] < values[j - 1] and values[j] <= values[j + 1]:
            res = minimize_scalar(
                detector, bounds=(grid[j - 1], grid[j + 1]), method="bounded", options={"xatol": xtol}
            )
            lam, val = float(res.x), float(res.fun)
            if values[j] < val:
                lam, val = float(grid[j]), float(values[j])
            lam, val = _polish(detector, lam, val, grid[j - 1], grid[j + 1])
            if val < detect_tol:
                scan.minima.append(lam)
    merged: list[float] = []
    for lam in sorted(scan.minima):
        if merged and lam - merged[-1] < CLUSTER_TOL:
            scan.clustered = True
            warnings.warn(f"crossings within {CLUSTER_TOL:g} of lambda={lam:.10g} merged", ClusterWarning)
            continue
        merged.append(lam)
    scan.locations = merged
    return scan


POLISH_STEPS = (1e-6, 1e-8)


def _polish(detector, lam, val, lo, hi):
    """Sharpen a minimum assuming ``detector ~ k |x - x*|`` nearby.

    Bounded Brent stops at a relative resolution of about ``1e-8 |x|``, which
    for steep detectors leaves values above ``DETECT_TOL``. The V-shaped model
    locates a transversal zero from two symmetric samples.
    """
    for s in POLISH_STEPS:
        a, b = lam - s, lam + s
        if a < lo or b > hi:
            continue
        fa, fb = detector(a), detector(b)
        k = (fa + fb) / (2.0 * s)
        if k <= 0.0:
            continue
        x = min(max(a + fa / k, lo), hi)
        fx = detector(x)
        if fx < val:
            lam, val = float(x), float(fx)
    return lam, val


OPENING_STEPS = (1e-4, 1e-5)
OPENING_MIN = 1e-3
OPENING_RTOL = 0.1


def opening_rate(detector, lam: float, spacing: float = 1.0) -> tuple[float, bool]:
    """Rate at which a detector zero opens up, and whether it opens linearly.

    A transversal zero satisfies ``detector(lam +- eps) ~ rate * eps``. The
    one-sided quotients at two step sizes must agree to ``OPENING_RTOL`` and
    exceed ``OPENING_MIN``; a tangency (quotients shrinking with ``eps``, or
    dominated by the detector's noise floor) fails. ``spacing`` bounds the
    steps away from neighbouring zeros.
    """
    quotients = []
    for side in (-1.0, 1.0):
        per_side = []
        for eps in OPENING_STEPS:
            eps = min(eps, 0.25 * spacing)
            x = lam + side * eps
            if not 0.0 <= x <= 1.0:
                break
            per_side.append(detector(x) / eps)
        quotients.append(per_side)
    flat = [q for per_side in quotients for q in per_side]
    if not flat:
        return 0.0, False
    rate = min(flat)
    linear = rate >= OPENING_MIN and all(
        abs(ps[0] - ps[-1]) <= OPENING_RTOL * max(ps) for ps in quotients if ps
    )
    return float(rate), bool(linear)


def spacings(locations: list[float]) -> list[float]:
    """Distance from each zero to its nearest neighbour (1 if alone)."""
    out = []
    for i, lam in enumerate(locations):
        gaps = [abs(lam - other) for j, other in enumerate(locations) if j != i]
        out.append(min(gaps, default=1.0))
    return out
