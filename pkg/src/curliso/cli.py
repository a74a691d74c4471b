"""Command-line front end: ``curliso <command> [options]``.

Exit codes: 0 success, 2 parse error, 3 invalid or unsupported input,
4 numerical non-convergence, 5 verification failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnose import DiagnosticError, SweepError, diagnose, sweep
from .geomfields import ChartError, verify_suite
from .gseig import ConvergenceError, EigenSolution, TopologyError, assemble, solve_smallest
from .mesh2 import FORMAT_VERSION, boundary_trace, dumps, loads, mesh_svg, revolved_volume, tag_name, triangulate
from .shapes import ellipse
from .xsection import CrossSection, GeometryError, criterion, criterion_svg

EXIT_OK, EXIT_PARSE, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 2, 3, 4, 5

DEFAULTS = {
    "criterion": {"input": None, "out_dir": "curliso-out", "tol": None, "svg": False},
    "solve": {"input": None, "out_dir": "curliso-out", "h": 0.05, "k": 3, "tol": None, "svg": False,
              "topology": "auto", "constrained": True},
    "diagnose": {"input": None, "out_dir": "curliso-out", "h": 0.05, "k": 3, "tol": None, "svg": False,
                 "shift_z": 5.0},
    "sweep": {"input": None, "out_dir": "curliso-out", "h": 0.05, "svg": False},
    "verify-model": {"out_dir": "curliso-out", "seed": 20240601, "n_points": 100, "wrong_potential": False},
    "mesh-info": {"input": None, "out_dir": "curliso-out", "h": 0.05, "svg": False},
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------- helpers


def read_json(path) -> tuple[object, str]:
    """Parse a JSON file; returns (document, sha256 of the raw bytes)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc.strerror}") from exc
    digest = hashlib.sha256(data).hexdigest()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc
    try:
        return json.loads(text), digest
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise CliError(EXIT_PARSE, f"{path}: JSON parse error at byte offset {offset}: {exc.msg}") from exc


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def report(command: str, config: dict, input_sha: str | None, result: dict) -> dict:
    return {"format_version": FORMAT_VERSION, "tool": "curliso", "version": __version__, "command": command,
            "config": config, "input_sha256": input_sha, "result": result}


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        doc, _ = read_json(args.config)
        if not isinstance(doc, dict):
            raise CliError(EXIT_INPUT, "config file must hold a JSON object")
        unknown = sorted(set(doc) - set(cfg))
        if unknown:
            raise CliError(EXIT_INPUT, f"unknown config keys for {command}: {unknown}")
        cfg.update(doc)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "input" in cfg:
        if not cfg["input"]:
            raise CliError(EXIT_INPUT, f"{command} needs --input")
        if not Path(cfg["input"]).is_file():
            raise CliError(EXIT_INPUT, f"input file not found: {cfg['input']}")
    for key in ("h", "tol"):
        val = cfg.get(key)
        if val is not None and not (isinstance(val, (int, float)) and val > 0):
            raise CliError(EXIT_INPUT, f"{key} must be a positive number")
    if "shift_z" in cfg and not isinstance(cfg["shift_z"], (int, float)):
        raise CliError(EXIT_INPUT, "shift_z must be a number")
    if "k" in cfg and not (isinstance(cfg["k"], int) and cfg["k"] >= 1):
        raise CliError(EXIT_INPUT, "k must be a positive integer")
    if "n_points" in cfg and not (isinstance(cfg["n_points"], int) and cfg["n_points"] >= 1):
        raise CliError(EXIT_INPUT, "n_points must be a positive integer")
    out = Path(cfg["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot create output directory {out}: {exc.strerror}") from exc
    return cfg


def load_cs(path) -> tuple[CrossSection, str]:
    doc, sha = read_json(path)
    return CrossSection.from_json(doc), sha


def mesh_summary(mesh) -> dict:
    return {
        "n_vertices": mesh.n_vertices, "n_triangles": len(mesh.triangles), "h": mesh.h, "area": mesh.area(),
        "min_angle_deg": mesh.min_angle(), "volume": revolved_volume(mesh),
        "boundary_curves": [{"name": c.name, "n_edges": len(c.edges), "length": float(c.lengths.sum()),
                             "closed": c.closed} for c in boundary_trace(mesh)],
    }


def solution_summary(sol: EigenSolution) -> dict:
    vol = revolved_volume(sol.problem.mesh)
    return {
        "lambda_plus": sol.lambda_plus, "lambda_minus": sol.lambda_minus, "label": sol.label,
        "mu": sol.mu, "eigen_gaps": sol.eigen_gaps, "c_b": sol.c_b, "residual_norm": sol.residual_norm,
        "near_degenerate": sol.near_degenerate, "topology": sol.topology, "constrained": sol.constrained,
        "volume": vol, "objective": sol.lambda_plus * vol ** (1.0 / 3.0),
    }


def solution_document(sol: EigenSolution) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": "eigen_solution", **solution_summary(sol),
            "mesh": dumps(sol.problem.mesh), "psi": sol.psi}


def load_solution(doc: dict) -> EigenSolution:
    mesh = loads(doc["mesh"])
    problem = assemble(mesh, doc["topology"], doc["constrained"])
    psi = np.asarray(doc["psi"], dtype=float)
    coeffs = problem.from_nodal(psi)
    c_b = float(coeffs[-1]) if problem.has_boundary_unknown else 0.0
    return EigenSolution(doc["lambda_plus"], np.asarray(doc["mu"], dtype=float), psi, coeffs, c_b,
                         doc["residual_norm"], doc["near_degenerate"], doc["topology"], doc["constrained"], problem)


def _solve_cs(cs: CrossSection, cfg: dict) -> EigenSolution:
    mesh = triangulate(cs, cfg["h"])
    problem = assemble(mesh, cfg.get("topology", "auto"), cfg.get("constrained", True))
    k = min(cfg["k"], problem.admissible_dim() - 1)
    return solve_smallest(problem, k=k, tol=cfg["tol"] or 0.0)


# ---------------------------------------------------------------- commands


def cmd_criterion(cfg: dict) -> int:
    cs, sha = load_cs(cfg["input"])
    rep = criterion(cs, cfg["tol"])
    out = Path(cfg["out_dir"])
    write_text(out / "criterion.json", dump_json(report("criterion", cfg, sha, rep.to_json())))
    if cfg["svg"]:
        write_text(out / "criterion.svg", criterion_svg(cs, rep))
    print(f"verdict: {rep.verdict}  L+ = {rep.len_L_plus:.6g}  rhs = {rep.rhs:.6g}")
    return EXIT_OK


def cmd_solve(cfg: dict) -> int:
    cs, sha = load_cs(cfg["input"])
    sol = _solve_cs(cs, cfg)
    mesh = sol.problem.mesh
    out = Path(cfg["out_dir"])
    result = {**solution_summary(sol), "mesh": mesh_summary(mesh)}
    write_text(out / "solve.json", dump_json(report("solve", cfg, sha, result)))
    write_text(out / "solution.json", dump_json(solution_document(sol)))
    rows = ["r,z,tag,psi"] + [f"{r!r},{z!r},{tag_name(t)},{p!r}" for (r, z), t, p in
                              zip(mesh.vertices.tolist(), mesh.tags.tolist(), sol.psi.tolist())]
    write_text(out / "psi.csv", "\n".join(rows) + "\n")
    if cfg["svg"]:
        from .plots import psi_contours

        write_text(out / "psi.svg", psi_contours(mesh, sol.psi, f"lambda+ = {sol.lambda_plus:.6f}"))
    print(f"lambda_plus = {sol.lambda_plus!r}  ({sol.label})")
    return EXIT_OK


def cmd_diagnose(cfg: dict) -> int:
    doc, sha = read_json(cfg["input"])
    if isinstance(doc, dict) and doc.get("kind") == "eigen_solution":
        try:
            sol = load_solution(doc)
        except (KeyError, TypeError) as exc:
            raise CliError(EXIT_INPUT, f"malformed solution file: {exc}") from exc
    else:
        sol = _solve_cs(CrossSection.from_json(doc), cfg)
    rep = diagnose(sol, shift_z=cfg["shift_z"])
    out = Path(cfg["out_dir"])
    result = {**rep.to_dict(), "near_degenerate": sol.near_degenerate, "eigen_gaps": sol.eigen_gaps}
    write_text(out / "diagnose.json", dump_json(report("diagnose", cfg, sha, result)))
    write_text(out / "boundary_speed.csv", "s,speed\n" + "".join(f"{s!r},{v!r}\n" for s, v in rep.boundary_speed))
    write_text(out / "g_xr.csv", "s,g_XR\n" + "".join(f"{s!r},{v!r}\n" for s, v in rep.g_XR_boundary))
    if cfg["svg"]:
        from .plots import boundary_speed, psi_contours

        write_text(out / "speed.svg", boundary_speed(rep.boundary_speed, rep.c_estimate))
        write_text(out / "psi.svg", psi_contours(sol.problem.mesh, sol.psi))
    print(f"constancy_score = {rep.constancy_score:.6f}  rellich = {rep.rellich_residual:.3e}")
    return EXIT_OK


FAMILY_KEYS = {
    "torus_center": {"kind", "radius", "centers", "n", "volume_normalize", "format_version"},
    "scale": {"kind", "base", "scales", "volume_normalize", "format_version"},
    "ellipse_aspect": {"kind", "center", "area", "aspects", "n", "volume_normalize", "format_version"},
    "explicit": {"kind", "members", "volume_normalize", "format_version"},
}


def build_family(doc) -> tuple[list, bool, str]:
    """(members, volume_normalize, parameter label) from a family document."""
    if not isinstance(doc, dict) or doc.get("kind") not in FAMILY_KEYS:
        raise CliError(EXIT_INPUT, f"family kind must be one of {sorted(FAMILY_KEYS)}")
    kind = doc["kind"]
    unknown = sorted(set(doc) - FAMILY_KEYS[kind])
    if unknown:
        raise CliError(EXIT_INPUT, f"unknown keys in {kind} family: {unknown}")
    try:
        if kind == "torus_center":
            from .shapes import circle

            n = doc.get("n", 512)
            members = [(float(c), CrossSection(circle((c, 0.0), doc["radius"], n))) for c in doc["centers"]]
            label = "center R0"
        elif kind == "scale":
            base = CrossSection.from_json(doc["base"])
            members = [(float(s), base.scaled(s)) for s in doc["scales"]]
            label = "scale"
        elif kind == "ellipse_aspect":
            n, area = doc.get("n", 512), doc["area"]
            members = []
            for asp in doc["aspects"]:
                a, b = math.sqrt(area * asp / math.pi), math.sqrt(area / (math.pi * asp))
                members.append((float(asp), CrossSection(ellipse(doc["center"], a, b, n))))
            label = "aspect a/b"
        else:
            members = [(float(m["parameter"]), CrossSection.from_json(m["cross_section"])) for m in doc["members"]]
            label = "parameter"
    except (KeyError, TypeError) as exc:
        raise CliError(EXIT_INPUT, f"malformed {kind} family: missing or bad field {exc}") from exc
    return members, bool(doc.get("volume_normalize", False)), label


def cmd_sweep(cfg: dict) -> int:
    doc, sha = read_json(cfg["input"])
    members, normalize, label = build_family(doc)
    res = sweep(members, cfg["h"], volume_normalize=normalize)
    out = Path(cfg["out_dir"])
    result = {"volume_normalize": normalize, "rows": [vars(r) for r in res.rows]}
    write_text(out / "sweep.json", dump_json(report("sweep", cfg, sha, result)))
    write_text(out / "sweep.csv", res.to_csv())
    if cfg["svg"]:
        from .plots import sweep_objective

        write_text(out / "sweep.svg", sweep_objective([r.parameter for r in res.rows],
                                                      [r.objective for r in res.rows], label))
    for r in res.rows:
        print(f"{r.parameter:10.4g}  lambda+ = {r.lambda_plus:.8f}  objective = {r.objective:.8f}")
    return EXIT_OK


def cmd_verify_model(cfg: dict) -> int:
    checks = verify_suite(cfg["seed"], cfg["n_points"], cfg["wrong_potential"])
    failed = [c.name for c in checks if not c.passed]
    out = Path(cfg["out_dir"])
    result = {"seed": cfg["seed"], "n_points": cfg["n_points"], "checks": [c.to_dict() for c in checks],
              "failed": failed, "passed": not failed}
    write_text(out / "verify-model.json", dump_json(report("verify-model", cfg, None, result)))
    if failed:
        print("verification failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


def cmd_mesh_info(cfg: dict) -> int:
    cs, sha = load_cs(cfg["input"])
    mesh = triangulate(cs, cfg["h"])
    out = Path(cfg["out_dir"])
    write_text(out / "mesh-info.json", dump_json(report("mesh-info", cfg, sha, mesh_summary(mesh))))
    write_text(out / "mesh.txt", dumps(mesh))
    if cfg["svg"]:
        write_text(out / "mesh.svg", mesh_svg(mesh))
    print(f"{mesh.n_vertices} vertices, {len(mesh.triangles)} triangles, min angle {mesh.min_angle():.2f} deg")
    return EXIT_OK


COMMANDS = {"criterion": cmd_criterion, "solve": cmd_solve, "diagnose": cmd_diagnose, "sweep": cmd_sweep,
            "verify-model": cmd_verify_model, "mesh-info": cmd_mesh_info}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curliso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curliso {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        keys = DEFAULTS[name]
        p.add_argument("--config", help="JSON file with option values (flags override)")
        p.add_argument("--out-dir", dest="out_dir")
        if "input" in keys:
            p.add_argument("--input", help="input JSON document")
        if "h" in keys:
            p.add_argument("--h", type=float, help="target mesh edge length")
        if "k" in keys:
            p.add_argument("--k", type=int, help="number of eigenvalues to compute")
        if "tol" in keys:
            p.add_argument("--tol", type=float, help="tolerance (criterion: axis-distance; solve: eigensolver)")
        if "svg" in keys:
            p.add_argument("--svg", action="store_true", default=None, help="also write SVG plots")
        if "seed" in keys:
            p.add_argument("--seed", type=int)
            p.add_argument("--n-points", dest="n_points", type=int)
            p.add_argument("--wrong-potential", dest="wrong_potential", action="store_true", default=None,
                           help="test mode: use f = 1 for the hyperbolic ball (must fail)")
        if "shift_z" in keys:
            p.add_argument("--shift-z", dest="shift_z", type=float, help="origin shift for the Rellich check")
        if "constrained" in keys:
            p.add_argument("--unconstrained", dest="constrained", action="store_false", default=None,
                           help="torus-like: plain psi = 0 instead of the orthogonality constraint")
            p.add_argument("--topology", choices=("auto", "ball_like", "torus_like"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE if isinstance(exc.cause, ConvergenceError) else EXIT_INPUT
    except (GeometryError, TopologyError, DiagnosticError, ChartError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
