"""Command-line entry point: ``fbms <subcommand> [options]``.

Exit codes: 0 pass, 1 a check failed, 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import acceptance, catenoid, spectra, sweepout, symmetry
from .catenoid import QuadratureError
from .config import RunConfig, load_config, tier
from .mesh import MeshError, TriMesh, area, export_mesh, import_mesh, topology, write_atomic
from .minimizer import FlowError, FlowOptions, minimize

log = logging.getLogger("fbms")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2, default=acceptance._json_default) + "\n").encode("utf-8")


def _csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def scalar_ply(mesh: TriMesh, values: np.ndarray) -> bytes:
    """ASCII PLY with one ``value`` property per vertex."""
    lines = [
        "ply", "format ascii 1.0", f"element vertex {mesh.n_vertices}",
        "property double x", "property double y", "property double z", "property double value",
        f"element face {mesh.n_triangles}", "property list uchar int vertex_indices", "end_header",
    ]
    for (x, y, z), v in zip(mesh.vertices.tolist(), np.asarray(values, dtype=float).tolist()):
        lines.append(f"{x!r} {y!r} {z!r} {v!r}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return ("\n".join(lines) + "\n").encode("ascii")


def _emit(out_dir: Path, name: str, payload: bytes) -> Path:
    path = out_dir / name
    write_atomic(path, payload)
    log.info("wrote %s", path)
    return path


def _read_mesh(path: str) -> TriMesh:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"mesh file {path} not found")
    fmt = p.suffix.lstrip(".").lower()
    if fmt not in ("obj", "ply"):
        raise UsageError(f"mesh file must be .obj or .ply, got {p.suffix!r}")
    return import_mesh(p.read_bytes(), fmt)


# ----------------------------------------------------------------------------
# subcommands


def cmd_critical_params(args, cfg: RunConfig) -> int:
    cc = catenoid.solve_critical_catenoid()
    res = catenoid.critical_residuals(cc)
    payload = dict(cc.as_dict(), residual_balance=res[0], residual_orthogonality=res[1])
    data = _json_bytes(payload)
    _emit(args.out_dir, "critical_params.json", data)
    sys.stdout.write(data.decode())
    return EXIT_OK


def cmd_sweepout_scan(args, cfg: RunConfig) -> int:
    ns = args.ns or cfg.grid_ns
    nt = args.nt or cfg.grid_nt
    grid = sweepout.scan_grid(sweepout.SweepoutParams.from_config(cfg), ns, nt)
    rows = grid.rows()
    _emit(args.out_dir, "sweepout_grid.csv", _csv_bytes(
        ["s", "t", "area", "genus", "boundary_count"],
        [[repr(r["s"]), repr(r["t"]), repr(r["area"]), r["genus"], r["boundary_count"]] for r in rows],
    ))
    summary = grid.summary()
    edge_max = float(max(grid.areas[:, 0].max(), grid.areas[:, -1].max()))
    interior_bad = [
        [r["s"], r["t"]] for r in rows
        if 0.0 < r["t"] < 1.0 and 0.0 < r["s"] < 1.0 and (r["genus"], r["boundary_count"]) != (1, 2)
    ]
    bounds_ok = summary["below_two_pi"] and summary["above_critical_catenoid"]
    summary.update(
        edge_row_max_area=edge_max,
        topology_mismatches=interior_bad,
        bounds="pass" if bounds_ok else "fail",
        tier=cfg.tier,
    )
    data = _json_bytes(summary)
    _emit(args.out_dir, "sweepout_summary.json", data)
    sys.stdout.write(data.decode())
    return EXIT_OK if bounds_ok else EXIT_FAIL


def _start_mesh(args, cfg: RunConfig) -> tuple[TriMesh, str]:
    tr = tier(cfg.tier)
    if args.mesh:
        return _read_mesh(args.mesh), f"file:{args.mesh}"
    if args.start == "disc":
        return catenoid.disc_mesh(0.0, tr.disc_rings // 2), "disc"
    if args.start == "catenoid":
        cc = catenoid.solve_critical_catenoid()
        return catenoid.revolve_to_mesh(cc.a, cc.h, tr.radial, tr.axial), "catenoid"
    s = cfg.search_start_s if args.s is None else args.s
    t = cfg.search_start_t if args.t is None else args.t
    params = replace(sweepout.SweepoutParams.from_config(cfg), columns=tr.search_columns, rows=tr.search_rows, ribbon_columns=tr.search_ribbon)
    return sweepout.sweepout_slice(s, t, params), f"slice:{s!r},{t!r}"


def _kind(genus: int, boundaries: int) -> str:
    if (genus, boundaries) == (0, 1):
        return "disc"
    if (genus, boundaries) == (0, 2):
        return "annulus"
    return f"genus {genus} with {boundaries} boundary curves"


def spectral_battery(mesh: TriMesh) -> dict:
    """Steklov, Jacobi index, normal-field residual, census and parity for a final mesh."""
    topo = topology(mesh)
    out: dict = {}
    stek = spectra.steklov_spectrum(mesh, 4)
    out["steklov_sigma1"] = float(stek.eigenvalues[1])
    jac = spectra.jacobi_spectrum(mesh, "robin", k=8)
    out["index"] = jac.index
    group = mesh.group
    if group is not None:
        eq = spectra.jacobi_spectrum(mesh, "robin", group=group, k=4)
        out["equivariant_index"] = eq.index
    check = spectra.jacobi_residual_xperp(mesh)
    out["xperp_interior_residual"] = check.interior_residual
    out["xperp_boundary_max"] = check.boundary_max
    if group is not None:
        out["census"] = spectra.fundamental_domain_census(mesh).as_dict()
    out["parity"] = spectra.boundary_parity_check(mesh).as_dict()
    out["summary"] = f"{_kind(topo.genus, topo.boundary_components)}, area {area(mesh) / math.pi:.4f}π, index {jac.index}" + (
        f", equivariant index {out['equivariant_index']}" if group is not None else "")
    return out


def cmd_minimize(args, cfg: RunConfig) -> int:
    mesh, label = _start_mesh(args, cfg)
    iterations = args.max_iterations or (cfg.search_iterations if label.startswith("slice") else cfg.max_iterations)
    opts = FlowOptions(method=args.method, max_iterations=iterations, gradient_tolerance=cfg.gradient_tolerance)
    final, report = minimize(mesh, opts)
    _emit(args.out_dir, "minimized.obj", export_mesh(final, "obj"))
    payload = {"start": label, "flow": report.as_dict(), "tier": cfg.tier}
    payload["verdict"] = spectral_battery(final)
    payload["verdict"]["converged"] = report.converged
    data = _json_bytes(payload)
    _emit(args.out_dir, "flow_report.json", data)
    print(f"{label}: {report.stop_reason}; {payload['verdict']['summary']}; converged={report.converged}")
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_spectrum(args, cfg: RunConfig) -> int:
    tr = tier(cfg.tier)
    if args.mesh:
        mesh = _read_mesh(args.mesh)
    elif args.surface == "disc":
        mesh = catenoid.disc_mesh(0.0, tr.disc_rings)
    else:
        cc = catenoid.solve_critical_catenoid()
        mesh = catenoid.revolve_to_mesh(cc.a, cc.h, tr.radial, tr.axial)
    if args.problem == "steklov":
        report = spectra.steklov_spectrum(mesh, args.k)
    else:
        group = None
        if args.group:
            name, _, n = args.group.partition(":")
            group = symmetry.group_from_catalog(name, int(n) if n else None)
        report = spectra.jacobi_spectrum(mesh, args.problem, group=group, k=args.k)
    _emit(args.out_dir, "spectrum.json", _json_bytes(report.as_dict()))
    _emit(args.out_dir, "spectrum.csv", _csv_bytes(["k", "eigenvalue"], [[k, repr(v)] for k, v in report.csv_rows()]))
    if args.eigenfunction is not None:
        if not 0 <= args.eigenfunction < report.eigenvectors.shape[1]:
            raise UsageError(f"eigenfunction index must lie in [0, {report.eigenvectors.shape[1]})")
        _emit(args.out_dir, f"eigenfunction_{args.eigenfunction}.ply", scalar_ply(mesh, report.eigenvectors[:, args.eigenfunction]))
    print(f"{report.kind} ({report.subspace}): " + ", ".join(f"{v:.6f}" for v in report.eigenvalues) + f"; index {report.index}")
    return EXIT_OK


def cmd_verify_all(args, cfg: RunConfig) -> int:
    if args.only:
        try:
            numbers = sorted({int(x) for x in args.only.split(",")})
        except ValueError:
            raise UsageError("--only takes a comma-separated list of criterion numbers") from None
        unknown = [n for n in numbers if n not in acceptance.CHECKS]
        if unknown:
            raise UsageError(f"no criterion numbered {unknown}")
        results = acceptance.run_checks(cfg, numbers)
    else:
        results = acceptance.verify_all(cfg, repeat=not args.no_repeat)
    for r in results:
        print(f"{r.line()}  ({r.seconds:.2f} s)")
    data = acceptance.summary_json(results).encode("utf-8")
    _emit(args.out_dir, "verify_all.json", data)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for output files")
    common.add_argument("--tier", choices=["fast", "standard", "fine"], help="resolution tier")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fbms", description="Free boundary minimal surfaces in the unit ball.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critical-params", parents=[common], help="solve for the critical catenoid")
    p.set_defaults(func=cmd_critical_params)

    p = sub.add_parser("sweepout-scan", parents=[common], help="area and topology over the sweepout grid")
    p.add_argument("--ns", type=int)
    p.add_argument("--nt", type=int)
    p.set_defaults(func=cmd_sweepout_scan)

    p = sub.add_parser("minimize", parents=[common], help="run the area minimiser and a spectral battery")
    p.add_argument("--start", choices=["slice", "catenoid", "disc"], default="slice")
    p.add_argument("--mesh", help="start from an OBJ/PLY file instead")
    p.add_argument("--s", type=float, help="sweepout parameter s for --start slice")
    p.add_argument("--t", type=float, help="sweepout parameter t for --start slice")
    p.add_argument("--method", choices=["newton", "descent"], default="newton")
    p.add_argument("--max-iterations", type=int)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("spectrum", parents=[common], help="Steklov or Jacobi eigenvalues of a mesh")
    p.add_argument("--mesh", help="OBJ/PLY file; defaults to a built-in surface")
    p.add_argument("--surface", choices=["disc", "catenoid"], default="catenoid")
    p.add_argument("--problem", choices=["steklov", "robin", "dirichlet"], default="robin")
    p.add_argument("--group", help="restrict to equivariant functions, e.g. prismatic:2")
    p.add_argument("-k", type=int, default=6)
    p.add_argument("--eigenfunction", type=int, help="write this eigenfunction as a PLY scalar")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers (skips the determinism rerun)")
    p.add_argument("--no-repeat", action="store_true", help="skip the determinism rerun")
    p.set_defaults(func=cmd_verify_all)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("tier", args.tier), ("seed", args.seed)) if v is not None}
        cfg = cfg.with_overrides(**overrides)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg)
    except (FlowError, spectra.SpectrumError, sweepout.SweepoutError, MeshError, QuadratureError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fbms: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OSError, ValueError) as exc:
        print(f"fbms: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
