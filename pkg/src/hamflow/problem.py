"""Problem documents: catalog references or sampled grids, as JSON-compatible trees.

Schema::

    {"name": str, "n": int,
     "source": {"kind": "catalog", "id": str, "params": {...}}
             | {"kind": "grid", "t_nodes": [...], "lambda_nodes": [...],
                "S": [[[[...]]]], "S_plus_inf": [...], "S_minus_inf": [...]},
     "tolerances": {"plateau_tol": float, "hyper_tol": float, "detect_tol": float, "grid_size": int},
     "discretization": {"T_num": float, "N": int, "lambda_steps": int, "boundary": str}}

``S`` is indexed ``[lambda][t][row][col]``; each limit is a single ``2n x 2n``
matrix or one matrix per lambda node.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import RectBivariateSpline, make_interp_spline

from . import catalog
from .errors import SchemaError
from .hamsys import HamiltonianFamily, validate_family

GRID_PLATEAU_TOL = 1e-6
SYMMETRY_TOL = 1e-12
TOLERANCE_KEYS = {"plateau_tol", "hyper_tol", "detect_tol", "grid_size"}
DISCRETIZATION_KEYS = {"T_num", "N", "lambda_steps", "boundary"}


@dataclass
class ProblemSpec:
    name: str
    n: int
    source: dict
    lambda_range: tuple[float, float] = (0.0, 1.0)
    tolerances: dict = field(default_factory=dict)
    discretization: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda_range"] = list(self.lambda_range)
        return out


def _matrix_stack(data, shape, what: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{what}: not a numeric array ({exc})") from None
    if arr.shape[-2:] != shape[-2:] or arr.ndim not in (len(shape), len(shape) - 1 if len(shape) > 2 else 2):
        raise SchemaError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{what}: non-finite entries")
    return arr


def _check_symmetric(arr: np.ndarray, what: str) -> None:
    asym = np.abs(arr - np.swapaxes(arr, -1, -2)).max(axis=(-1, -2))
    scale = np.maximum(np.abs(arr).max(axis=(-1, -2)), 1.0)
    bad = np.argwhere(asym > SYMMETRY_TOL * scale)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise SchemaError(f"{what}: sample at node index {idx} is not symmetric")


def grid_family(
    t_nodes,
    lambda_nodes,
    S,
    S_plus_inf,
    S_minus_inf,
    n: int,
    name: str = "grid",
    plateau_tol: float = GRID_PLATEAU_TOL,
) -> HamiltonianFamily:
    """Family interpolated from samples by cubic splines in ``t`` and ``lam``.

    ``lambda_nodes`` are physical parameters; they are mapped affinely onto
    ``[0, 1]``. Outside the sampled time range the family equals its limits,
    and the end samples must match the limits to ``plateau_tol``.
    """
    d = 2 * n
    t = np.asarray(t_nodes, dtype=float)
    lam = np.asarray(lambda_nodes, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise SchemaError("t_nodes must be a strictly increasing list with at least two entries")
    # the lambda-derivative needs a spline of degree >= 2
    if lam.ndim != 1 or lam.size < 3 or np.any(np.diff(lam) <= 0):
        raise SchemaError("lambda_nodes must be a strictly increasing list with at least three entries")
    if t[0] >= 0 or t[-1] <= 0:
        raise SchemaError("t_nodes must straddle t = 0")
    S = np.asarray(_matrix_stack(S, (lam.size, t.size, d, d), "S"))
    if S.shape != (lam.size, t.size, d, d):
        raise SchemaError(f"S: expected shape {(lam.size, t.size, d, d)}, got {S.shape}")
    _check_symmetric(S, "S")
    s_nodes = (lam - lam[0]) / (lam[-1] - lam[0])
    limits = {}
    for side, data, key in ((+1, S_plus_inf, "S_plus_inf"), (-1, S_minus_inf, "S_minus_inf")):
        if data is None:
            raise SchemaError(f"missing {key}")
        M = _matrix_stack(data, (lam.size, d, d), key)
        if M.ndim == 2:
            M = np.broadcast_to(M, (lam.size, d, d))
        _check_symmetric(M, key)
        end = S[:, -1] if side > 0 else S[:, 0]
        dev = np.abs(end - M).max(axis=(1, 2))
        if np.any(dev > plateau_tol):
            i = int(np.argmax(dev))
            raise SchemaError(f"{key}: end sample at lambda node {i} differs from the limit by {dev[i]:.3e}")
        limits[side] = make_interp_spline(s_nodes, M, k=min(3, lam.size - 1), axis=0)
    kx, ky = min(3, lam.size - 1), min(3, t.size - 1)
    iu = np.triu_indices(d)
    splines = [RectBivariateSpline(s_nodes, t, S[:, :, a, b], kx=kx, ky=ky) for a, b in zip(*iu)]
    T_plateau = float(max(-t[0], t[-1]))

    def assemble(values, m):
        out = np.empty((m, d, d))
        out[:, iu[0], iu[1]] = values
        out[:, iu[1], iu[0]] = values
        return out

    def S_func(s, times, dx=0):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        s_arr = np.full(times.shape, float(s))
        vals = np.stack([sp.ev(s_arr, times, dx=dx) for sp in splines], axis=1)
        out = assemble(vals, times.size)
        above, below = times >= t[-1], times <= t[0]
        if dx == 0:
            out[above] = limits[+1](s)
            out[below] = limits[-1](s)
        else:
            out[above] = limits[+1].derivative()(s)
            out[below] = limits[-1].derivative()(s)
        return out

    return HamiltonianFamily(
        n=n,
        S=S_func,
        S_plus_inf=lambda s: limits[+1](s),
        S_minus_inf=lambda s: limits[-1](s),
        T_plateau=T_plateau,
        S_dot=lambda s, times: S_func(s, times, dx=1),
        plateau_tol=plateau_tol,
        name=name,
        lambda_range=(float(lam[0]), float(lam[-1])),
    )


def export_grid(fam: HamiltonianFamily, t_nodes, lambda_steps: int = 20) -> dict:
    """Sample ``fam`` into a grid source (``lambda_steps + 1`` parameter nodes)."""
    t = np.asarray(t_nodes, dtype=float)
    s = np.linspace(0.0, 1.0, lambda_steps + 1)
    S = np.stack([fam.matrices(x, t) for x in s])
    return {
        "kind": "grid",
        "t_nodes": t.tolist(),
        "lambda_nodes": [fam.physical(x) for x in s],
        "S": S.tolist(),
        "S_plus_inf": np.stack([fam.limit(x, +1) for x in s]).tolist(),
        "S_minus_inf": np.stack([fam.limit(x, -1) for x in s]).tolist(),
    }


def _parse_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, list):
            value = tuple(value)
        if isinstance(value, bool) or not isinstance(value, (int, float, tuple)):
            raise SchemaError(f"catalog parameter {key!r} must be a number or a list of numbers")
        out[key] = value
    if "depth" in out and not out["depth"] > 0:
        raise SchemaError("depth must be positive")
    lam = out.get("lambda", out.get("lam"))
    if lam is not None and (len(lam) != 2 or not lam[0] < lam[1]):
        raise SchemaError("lambda must be an increasing pair [a, b]")
    return out


def problem_from_dict(doc: dict) -> tuple[ProblemSpec, HamiltonianFamily]:
    """Validate a problem document and build its family."""
    if not isinstance(doc, dict):
        raise SchemaError("problem document must be an object")
    source = doc.get("source")
    if not isinstance(source, dict) or "kind" not in source:
        raise SchemaError("problem needs a source with a 'kind'")
    tolerances = dict(doc.get("tolerances") or {})
    discretization = dict(doc.get("discretization") or {})
    for keys, given, what in ((TOLERANCE_KEYS, tolerances, "tolerances"), (DISCRETIZATION_KEYS, discretization, "discretization")):
        unknown = set(given) - keys
        if unknown:
            raise SchemaError(f"unknown {what} keys: {sorted(unknown)}")
    kind = source["kind"]
    if kind == "catalog":
        params = _parse_params(dict(source.get("params") or {}))
        if "plateau_tol" in tolerances:
            params["plateau_tol"] = float(tolerances["plateau_tol"])
        fam = catalog.build(str(source.get("id")), **params)
    elif kind == "grid":
        if "n" not in doc:
            raise SchemaError("grid problems must declare n")
        fam = grid_family(
            source.get("t_nodes"),
            source.get("lambda_nodes"),
            source.get("S"),
            source.get("S_plus_inf"),
            source.get("S_minus_inf"),
            int(doc["n"]),
            name=str(doc.get("name", "grid")),
            plateau_tol=float(tolerances.get("plateau_tol", GRID_PLATEAU_TOL)),
        )
    else:
        raise SchemaError(f"unknown source kind {kind!r}")
    if "n" in doc and int(doc["n"]) != fam.n:
        raise SchemaError(f"declared n={doc['n']} but the family has n={fam.n}")
    for key in ("hyper_tol", "detect_tol"):
        if key in tolerances and not (isinstance(tolerances[key], (int, float)) and tolerances[key] > 0):
            raise SchemaError(f"tolerances.{key} must be a positive number")
    if "hyper_tol" in tolerances:
        fam = replace(fam, hyper_tol=float(tolerances["hyper_tol"]))
    validate_family(fam)
    spec = ProblemSpec(
        name=str(doc.get("name", fam.name)),
        n=fam.n,
        source=source,
        lambda_range=fam.lambda_range,
        tolerances=tolerances,
        discretization=discretization,
    )
    return spec, fam


def load_problem(path: str | Path) -> tuple[ProblemSpec, HamiltonianFamily]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(doc)


def catalog_problem(entry: str, params: dict | None = None) -> tuple[ProblemSpec, HamiltonianFamily]:
    return problem_from_dict({"name": entry, "source": {"kind": "catalog", "id": entry, "params": params or {}}})
