"""Run reports: JSON-native records of a command's inputs, results and tolerances."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, _scan, hamsys, kernels, problem, specflow, symplectic
from .specflow import CrossingReport
from .verify import BifurcationCertificate, VerificationReport


def tolerance_set(solver: hamsys.FlowSolver | None = None, **overrides) -> dict:
    """Every numerical threshold the pipeline uses, for reproducibility."""
    solver = solver or hamsys.DEFAULT_SOLVER
    tol = {
        "ortho_tol": symplectic.ORTHO_TOL,
        "isotropy_tol": symplectic.ISOTROPY_TOL,
        "intersection_tol": symplectic.INTERSECTION_TOL,
        "endpoint_tol": symplectic.ENDPOINT_TOL,
        "form_tol": symplectic.FORM_TOL,
        "fd_step": symplectic.FD_STEP,
        "richardson_rtol": symplectic.RICHARDSON_RTOL,
        "richardson_atol": symplectic.RICHARDSON_ATOL,
        "chart_cond_max": symplectic.CHART_COND_MAX,
        "rotation_deltas": list(symplectic.ROTATION_DELTAS),
        "detect_tol": _scan.DETECT_TOL,
        "cluster_tol": _scan.CLUSTER_TOL,
        "xtol": _scan.XTOL,
        "opening_steps": list(_scan.OPENING_STEPS),
        "opening_min": _scan.OPENING_MIN,
        "opening_rtol": _scan.OPENING_RTOL,
        "hyper_tol": hamsys.HYPER_TOL,
        "sdot_step": hamsys.SDOT_STEP,
        "sdot_rtol": hamsys.SDOT_RTOL,
        "decay_tol": hamsys.DECAY_TOL,
        "quad_tol": hamsys.QUAD_TOL,
        "step": solver.step,
        "leg": solver.leg,
        "defect_tol": solver.defect_tol,
        "delta_grid": list(specflow.DEFAULT_DELTAS),
        "window_cap": specflow.WINDOW_CAP,
        "window_floor": specflow.WINDOW_FLOOR,
        "move_safety": specflow.MOVE_SAFETY,
        "grid_symmetry_tol": problem.SYMMETRY_TOL,
        "backend": kernels.BACKEND,
    }
    tol.update(overrides)
    return tol


def crossing_to_dict(r: CrossingReport, fam: hamsys.HamiltonianFamily | None = None) -> dict:
    out = {
        "lambda0": r.lambda0,
        "kernel_dim": r.kernel_dim,
        "form": r.form.L.tolist(),
        "form_eigenvalues": r.form.eigenvalues.tolist(),
        "signature": r.signature,
        "regular": r.regular,
        "opening_rate": r.opening_rate,
        "kernel_residual": r.kernel_residual,
    }
    if fam is not None:
        out["lambda0_physical"] = fam.physical(r.lambda0)
    return out


def verification_to_dict(rep: VerificationReport, fam: hamsys.HamiltonianFamily | None = None) -> dict:
    return {
        "sfl_crossings": rep.sfl_crossings,
        "sfl_discretized": rep.sfl_discretized,
        "maslov": rep.maslov,
        "agree": rep.agree,
        "crossings": [crossing_to_dict(r, fam) for r in rep.crossings],
        "diagnostics": _jsonable(rep.diagnostics),
    }


def certificate_to_dict(cert: BifurcationCertificate, fam: hamsys.HamiltonianFamily | None = None) -> dict:
    out = asdict(cert)
    out["bifurcation_exists"] = cert.bifurcation_exists
    out["certified_count"] = cert.certified_count
    if fam is not None:
        out["sigma_locations_physical"] = [fam.physical(x) for x in cert.sigma_locations]
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


@dataclass
class RunReport:
    problem: dict
    command: str
    results: dict
    timing: dict = field(default_factory=dict)
    version: str = __version__
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> RunReport:
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls.from_dict(json.loads(text))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
