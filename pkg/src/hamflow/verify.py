"""Cross-validation of spectral flow against the relative Maslov index, and
bifurcation certificates built from the linearized family."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from . import __version__
from .errors import AssumptionError, IrregularCrossingError, PreconditionError
from .hamsys import FlowSolver, HamiltonianFamily, IntersectionDetector, validate_family
from .specflow import (
    DEFAULT_DELTAS,
    WINDOW_CAP,
    CrossingReport,
    CrossingScan,
    default_discretization,
    discretized_flow,
    regularize_family,
    scan_crossings,
    spectral_flow_crossings,
)
from ._scan import DETECT_TOL
from .symplectic import MaslovResult, relative_maslov


@dataclass
class VerifyConfig:
    grid_size: int = 200
    t0: float = 0.0
    delta_grid: tuple = DEFAULT_DELTAS
    T_num: float | None = None
    N: int | None = None
    lambda_steps: int = 200
    boundary: str = "plateau"
    window_cap: float = WINDOW_CAP
    product_route: bool = True
    detect_tol: float = DETECT_TOL
    solver: FlowSolver = field(default_factory=FlowSolver)


@dataclass
class VerificationReport:
    sfl_crossings: int
    sfl_discretized: int
    maslov: int
    crossings: list[CrossingReport]
    diagnostics: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def agree(self) -> bool:
        return self.sfl_crossings == self.sfl_discretized == self.maslov


@dataclass
class BifurcationCertificate:
    maslov: int
    n: int
    lower_bound: int
    sigma_finite: bool
    sigma_locations: list[float]

    @property
    def bifurcation_exists(self) -> bool:
        """At least one bifurcation point in ``(0, 1)`` is certified."""
        return self.maslov != 0

    @property
    def certified_count(self) -> int:
        """Number of distinct bifurcation points certified (0 if only existence holds)."""
        return self.lower_bound if self.sigma_finite else int(self.bifurcation_exists)


def family_maslov(
    fam: HamiltonianFamily,
    t0: float = 0.0,
    grid_size: int = 200,
    route: str = "direct",
    solver: FlowSolver | None = None,
    detector: IntersectionDetector | None = None,
    detect_tol: float = DETECT_TOL,
) -> MaslovResult:
    """Relative Maslov index of ``lam -> (E^u_lam(t0), E^s_lam(t0))``."""
    detector = detector or IntersectionDetector(fam, t0, solver)
    try:
        return relative_maslov(detector.unstable, detector.stable, grid_size, route=route, detect_tol=detect_tol)
    except PreconditionError as exc:
        if isinstance(exc, AssumptionError):
            raise
        raise AssumptionError("A2", None, f"at t0={t0:g}: {exc}") from exc


def verify_main(fam: HamiltonianFamily, config: VerifyConfig | None = None) -> VerificationReport:
    """Compute the spectral flow by crossing forms and by the discretized
    operator, and the relative Maslov index of ``(E^u(t0), E^s(t0))``.

    Irregular crossings are removed by the smallest admissible shift
    ``S + delta I`` before the crossing-form and Maslov computations; the
    discretized route always runs on the unshifted family. On disagreement the
    diagnostics carry crossing locations from every route and the eigenvalue
    trajectories.
    """
    config = config or VerifyConfig()
    solver = config.solver
    clock = {}
    start = time.perf_counter()
    checks = validate_family(fam)
    clock["validate"] = time.perf_counter() - start

    tic = time.perf_counter()
    detector = IntersectionDetector(fam, config.t0, solver)
    scan = scan_crossings(fam, config.grid_size, config.t0, solver, config.detect_tol, detector=detector)
    try:
        sfl_c, reports = spectral_flow_crossings(fam, config.grid_size, solver, scan=scan)
        delta, work = 0.0, fam
    except IrregularCrossingError:
        reg = regularize_family(fam, config.delta_grid, config.grid_size, solver, detect_tol=config.detect_tol)
        delta, work = reg.delta, reg.family
        detector = IntersectionDetector(work, config.t0, solver)
        scan = scan_crossings(work, config.grid_size, config.t0, solver, config.detect_tol, detector=detector)
        sfl_c, reports = spectral_flow_crossings(work, config.grid_size, solver, scan=scan)
    clock["crossings"] = time.perf_counter() - tic

    tic = time.perf_counter()
    disc = default_discretization(fam, config.T_num, config.N, config.boundary)
    flow = discretized_flow(fam, disc, config.lambda_steps, config.window_cap)
    clock["discretized"] = time.perf_counter() - tic

    tic = time.perf_counter()
    mas = family_maslov(work, config.t0, config.grid_size, "direct", solver, detector, config.detect_tol)
    clock["maslov"] = time.perf_counter() - tic
    product = None
    if config.product_route:
        tic = time.perf_counter()
        product = family_maslov(work, config.t0, config.grid_size, "product", solver, detector, config.detect_tol).index
        clock["maslov_product"] = time.perf_counter() - tic
    clock["total"] = time.perf_counter() - start

    diagnostics = {
        "version": __version__,
        "family": fam.name,
        "delta": delta,
        "maslov_rotation": mas.delta,
        "maslov_product": product,
        "T_plateau": fam.T_plateau,
        "C1": checks["C1"],
        "min_gap": checks["min_gap"],
        "discretization": {
            "T_num": disc.T_num,
            "N": disc.N,
            "lambda_steps": config.lambda_steps,
            "boundary": config.boundary,
            "window_cap": config.window_cap,
        },
        "crossing_locations": [r.lambda0 for r in reports],
        "maslov_locations": [c.lam for c in mas.crossings],
        "discrete_crossings": flow.crossing_intervals,
        "clustered": scan.clustered or mas.clustered,
        "max_symplectic_defect": solver.max_defect,
        "max_kernel_dim": max((r.kernel_dim for r in reports), default=0),
        "max_kernel_residual": max((r.kernel_residual for r in reports), default=0.0),
        "timing": clock,
    }
    trajectories = {
        "detector": (scan.grid, scan.detector),
        "eigenvalues": (flow.lambdas, flow.eigenvalues),
    }
    report = VerificationReport(sfl_c, flow.sfl, mas.index, reports, diagnostics, trajectories)
    if not report.agree or (product is not None and product != mas.index):
        diagnostics["eigenvalue_trajectories"] = {
            "lambda": flow.lambdas.tolist(),
            "eigenvalues": [e.tolist() for e in flow.eigenvalues],
        }
        diagnostics["detector"] = {"lambda": scan.grid.tolist(), "value": scan.detector.tolist()}
    return report


def maslov_by_t0(fam: HamiltonianFamily, t0_list, grid_size: int = 200, solver: FlowSolver | None = None) -> dict:
    return {float(t0): family_maslov(fam, t0, grid_size, solver=solver).index for t0 in t0_list}


def maslov_t0_independence(fam: HamiltonianFamily, t0_list, grid_size: int = 200, solver: FlowSolver | None = None) -> bool:
    """Whether the relative Maslov index is the same for every base time in ``t0_list``."""
    return len(set(maslov_by_t0(fam, t0_list, grid_size, solver).values())) == 1


def bifurcation_certificate(
    fam: HamiltonianFamily,
    t0: float = 0.0,
    grid_size: int = 200,
    solver: FlowSolver | None = None,
    scan: CrossingScan | None = None,
    detect_tol: float = DETECT_TOL,
) -> BifurcationCertificate:
    """Bifurcation certificate from the linearization family ``fam``.

    A nonzero Maslov index certifies a bifurcation point in ``(0, 1)``; if the
    singular set is finite there are at least ``floor(|maslov| / n)`` distinct
    ones.
    """
    validate_family(fam)
    detector = IntersectionDetector(fam, t0, solver)
    scan = scan or scan_crossings(fam, grid_size, t0, solver, detect_tol, detector=detector)
    mas = family_maslov(fam, t0, grid_size, solver=solver, detector=detector, detect_tol=detect_tol)
    finite = not (scan.clustered or mas.clustered)
    return BifurcationCertificate(
        maslov=mas.index,
        n=fam.n,
        lower_bound=math.floor(abs(mas.index) / fam.n),
        sigma_finite=finite,
        sigma_locations=list(scan.locations),
    )
