"""Command line front end: ``hamflow <command> (--catalog ID | --problem FILE) [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings

import numpy as np

from . import __version__
from ._scan import DETECT_TOL, spacings
from .errors import AssumptionError, HamflowError, IrregularCrossingError
from .hamsys import FlowSolver, IntersectionDetector
from .problem import catalog_problem, load_problem
from .report import (
    RunReport,
    certificate_to_dict,
    crossing_to_dict,
    tolerance_set,
    verification_to_dict,
)
from .specflow import (
    DEFAULT_DELTAS,
    crossing_report,
    default_discretization,
    discretized_flow,
    regularize_family,
    scan_crossings,
    spectral_flow_crossings,
)
from .verify import VerifyConfig, bifurcation_certificate, family_maslov, verify_main

COMMANDS = ("crossings", "sfl", "maslov", "verify", "bifurcate")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_params(items: list[str]) -> dict:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"--param expects k=v, got {item!r}")
        params[key.strip()] = _parse_value(value.strip())
    return params


def parse_delta_grid(text: str) -> tuple[float, ...]:
    """``"0,1e-4,-1e-4"`` or ``"default"``."""
    if text.strip() == "default":
        return DEFAULT_DELTAS
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delta grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamflow",
        description="Spectral flow, Maslov index and bifurcation certificates for linear Hamiltonian families.",
    )
    parser.add_argument("--version", action="version", version=f"hamflow {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--catalog", metavar="ID", help="built-in family")
    src.add_argument("--problem", metavar="FILE", help="JSON problem document")
    parser.add_argument("--param", action="append", default=[], metavar="K=V", help="catalog parameter (JSON value)")
    parser.add_argument("--json", metavar="PATH", help="write the run report as JSON")
    parser.add_argument("--csv", metavar="PATH", help="write detector/eigenvalue trajectories as CSV")
    parser.add_argument("--t0", type=float, default=0.0, help="base time for E^u/E^s (default 0)")
    parser.add_argument("--delta-grid", type=parse_delta_grid, default=None, help="comma list of shifts")
    parser.add_argument("--tnum", type=float, default=None, help="truncation half-width")
    parser.add_argument("--gridpoints", type=int, default=None, help="grid nodes of the discretization")
    parser.add_argument("--lambda-steps", type=int, default=None, help="parameter steps of the discretized sweep")
    parser.add_argument("--boundary", choices=("plateau", "dirichlet"), default=None)
    return parser


def _config(args, spec) -> VerifyConfig:
    disc = spec.discretization
    tol = spec.tolerances
    return VerifyConfig(
        grid_size=int(tol.get("grid_size", 200)),
        t0=args.t0,
        delta_grid=args.delta_grid or DEFAULT_DELTAS,
        T_num=args.tnum if args.tnum is not None else disc.get("T_num"),
        N=args.gridpoints if args.gridpoints is not None else disc.get("N"),
        lambda_steps=args.lambda_steps or int(disc.get("lambda_steps", 200)),
        boundary=args.boundary or disc.get("boundary", "plateau"),
        detect_tol=float(tol.get("detect_tol", DETECT_TOL)),
        solver=FlowSolver(),
    )


def _table(headers: list[str], rows: list[list]) -> str:
    cells = [[_fmt(x) for x in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(float(v)) for v in x) + "]"
    return str(x)


def _crossing_table(reports, fam) -> str:
    rows = [
        [r.lambda0, fam.physical(r.lambda0), r.kernel_dim, r.form.eigenvalues, r.signature, r.regular]
        for r in reports
    ]
    return _table(["lambda", "physical", "dim ker", "form eigenvalues", "sgn", "regular"], rows)


def _write_csv(path, detector=None, eigen=None) -> None:
    """Columns ``lambda, detector, eig_1..eig_k``; cells are empty where a series was not sampled."""
    rows: dict[float, dict] = {}
    if detector is not None:
        for lam, val in zip(*detector):
            rows.setdefault(round(float(lam), 12), {})["detector"] = float(val)
    k = 0
    if eigen is not None:
        for lam, eigs in zip(*eigen):
            rows.setdefault(round(float(lam), 12), {})["eigs"] = list(map(float, eigs))
            k = max(k, len(eigs))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "detector"] + [f"eig_{i + 1}" for i in range(k)])
        for lam in sorted(rows):
            r = rows[lam]
            eigs = r.get("eigs", [])
            w.writerow([repr(lam), repr(r["detector"]) if "detector" in r else ""] + [repr(e) for e in eigs] + [""] * (k - len(eigs)))


def run(command: str, spec, fam, args) -> tuple[RunReport, str, dict]:
    """Dispatch ``command``; returns the report, the text table and CSV series."""
    config = _config(args, spec)
    solver = config.solver
    series: dict = {}
    start = time.perf_counter()
    if command == "crossings":
        detector = IntersectionDetector(fam, config.t0, solver)
        scan = scan_crossings(fam, config.grid_size, config.t0, solver, config.detect_tol, detector=detector)
        reports = [
            crossing_report(fam, lam, solver, detector=detector, spacing=gap)
            for lam, gap in zip(scan.locations, spacings(scan.locations))
        ]
        results = {"crossings": [crossing_to_dict(r, fam) for r in reports], "clustered": scan.clustered}
        text = _crossing_table(reports, fam)
        series["detector"] = (scan.grid, scan.detector)
    elif command == "sfl":
        scan = scan_crossings(fam, config.grid_size, config.t0, solver, config.detect_tol)
        try:
            sfl_c, reports = spectral_flow_crossings(fam, config.grid_size, solver, scan=scan)
            delta = 0.0
        except IrregularCrossingError:
            reg = regularize_family(fam, config.delta_grid, config.grid_size, solver, detect_tol=config.detect_tol)
            scan = scan_crossings(reg.family, config.grid_size, config.t0, solver, config.detect_tol)
            sfl_c, reports = spectral_flow_crossings(reg.family, config.grid_size, solver, scan=scan)
            delta = reg.delta
        disc = default_discretization(fam, config.T_num, config.N, config.boundary)
        flow = discretized_flow(fam, disc, config.lambda_steps, config.window_cap)
        results = {
            "sfl_crossings": sfl_c,
            "sfl_discretized": flow.sfl,
            "delta": delta,
            "crossings": [crossing_to_dict(r, fam) for r in reports],
            "discrete_crossings": [list(x) for x in flow.crossing_intervals],
            "discretization": {"T_num": disc.T_num, "N": disc.N, "lambda_steps": config.lambda_steps},
        }
        text = _crossing_table(reports, fam) + f"\n\nspectral flow: crossings {sfl_c}, discretized {flow.sfl}"
        if delta:
            text += f" (crossing route regularized with delta={delta:g})"
        series["detector"] = (scan.grid, scan.detector)
        series["eigen"] = (flow.lambdas, flow.eigenvalues)
    elif command == "maslov":
        detector = IntersectionDetector(fam, config.t0, solver)
        mas = family_maslov(fam, config.t0, config.grid_size, solver=solver, detector=detector, detect_tol=config.detect_tol)
        product = family_maslov(fam, config.t0, config.grid_size, "product", solver, detector, config.detect_tol).index
        results = {
            "maslov": mas.index,
            "maslov_product": product,
            "rotation": mas.delta,
            "crossings": [
                {"lambda0": c.lam, "form": c.form.L.tolist(), "signature": c.signature, "regular": c.regular}
                for c in mas.crossings
            ],
            "t0": config.t0,
        }
        rows = [[c.lam, fam.physical(c.lam), c.form.eigenvalues, c.signature] for c in mas.crossings]
        text = _table(["lambda", "physical", "relative form eigenvalues", "sgn"], rows)
        text += f"\n\nrelative Maslov index: {mas.index} (product route {product})"
    elif command == "verify":
        rep = verify_main(fam, config)
        results = verification_to_dict(rep, fam)
        text = _crossing_table(rep.crossings, fam) + "\n\n" + _table(
            ["sfl (crossings)", "sfl (discretized)", "maslov", "agree"],
            [[rep.sfl_crossings, rep.sfl_discretized, rep.maslov, rep.agree]],
        )
        series["detector"] = rep.trajectories["detector"]
        series["eigen"] = rep.trajectories["eigenvalues"]
    elif command == "bifurcate":
        scan = scan_crossings(fam, config.grid_size, config.t0, solver, config.detect_tol)
        cert = bifurcation_certificate(fam, config.t0, config.grid_size, solver, scan=scan, detect_tol=config.detect_tol)
        results = certificate_to_dict(cert, fam)
        lines = [
            f"maslov index        {cert.maslov}",
            f"n                   {cert.n}",
            f"lower bound         {cert.lower_bound}",
            f"singular set finite {cert.sigma_finite}",
            "singular instants   " + _fmt([fam.physical(x) for x in cert.sigma_locations]),
        ]
        if cert.bifurcation_exists:
            lines.append(
                f"certified: at least {cert.certified_count} bifurcation point(s) in the open parameter interval"
            )
        else:
            lines.append("no bifurcation certified (Maslov index 0)")
        text = "\n".join(lines)
        series["detector"] = (scan.grid, scan.detector)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(command)
    elapsed = time.perf_counter() - start
    report = RunReport(
        problem=spec.to_dict(),
        command=command,
        results=results,
        timing={"total": elapsed},
        tolerances=tolerance_set(
            solver,
            plateau_tol=fam.plateau_tol,
            hyper_tol=fam.hyper_tol,
            detect_tol=config.detect_tol,
            grid_size=config.grid_size,
        ),
    )
    return report, text, series


def _describe(exc: HamflowError) -> str:
    msg = f"error: {exc}"
    if isinstance(exc, AssumptionError):
        msg += "\nhint: the limits must be hyperbolic (A1) and the endpoint operators invertible (A2)"
    elif isinstance(exc, IrregularCrossingError):
        msg += "\nhint: widen --delta-grid"
    elif exc.exit_code == 3:
        msg += "\nhint: refine --lambda-steps or --gridpoints, or change --tnum"
    return msg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.catalog:
            spec, fam = catalog_problem(args.catalog, parse_params(args.param))
        else:
            if args.param:
                parser.error("--param only applies to --catalog")
            spec, fam = load_problem(args.problem)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report, text, series = run(args.command, spec, fam, args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except HamflowError as exc:
        print(_describe(exc), file=sys.stderr)
        return exc.exit_code
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{spec.name}  [{args.command}]")
    print(text)
    if args.json:
        report.write(args.json)
    if args.csv:
        _write_csv(args.csv, series.get("detector"), series.get("eigen"))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
