"""Diagnostics for computed eigenfields and shape sweeps.

The optimality conditions for the curl eigenvalue (constant |X| on the
boundary, a Rellich-type integral identity, constancy of g(X, R) on the
boundary) are turned into reported numbers.  A domain whose boundary speed is
far from constant cannot be optimal; nothing here certifies optimality.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .gseig import EigenSolution, TopologyError, field_arrays, solve
from .mesh2 import TriMesh, outer_boundary, revolved_volume, triangulate
from .xsection import CrossSection, polygon_volume

THREADS_ENV = "CURLISO_THREADS"
_GAUSS2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


class DiagnosticError(ValueError):
    """Diagnostic not applicable to the given solution."""


class SweepError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sweep member {index} failed: {cause}")
        self.index = index
        self.cause = cause


@dataclass
class DiagnosticsReport:
    boundary_speed: list
    constancy_score: float
    c_estimate: float
    vanishing_speed_warning: bool
    rellich_residual: float
    rellich_residual_shifted: float
    criticality_gap: float
    g_XR_boundary: list
    g_XR_deviation: float
    c0: float
    flux_balance: float | None
    lambda_plus: float
    volume: float
    objective: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_nonzero(sol: EigenSolution) -> None:
    if not np.any(sol.psi):
        raise DiagnosticError("stream function is identically zero")


def _field_scale(sol: EigenSolution) -> float:
    return float(np.max(np.abs(sol.lambda_plus * sol.psi)))


# ------------------------------------------------------------- boundary speed


def boundary_constancy(sol: EigenSolution, mesh: TriMesh | None = None):
    """|X| at outer-boundary edge midpoints.

    Returns ``(boundary_speed, constancy_score, c_estimate, warning)`` where
    boundary_speed is an (n, 2) array of (arclength, |X|).  The warning is set
    when the boundary speed is negligible against the interior field.
    """
    _check_nonzero(sol)
    mesh = mesh if mesh is not None else sol.problem.mesh
    s_all, speed_all, offset = [], [], 0.0
    for curve in outer_boundary(mesh):
        X = field_arrays(sol.problem, sol, curve.midpoints(mesh))
        speed_all.append(np.linalg.norm(X, axis=1))
        s_all.append(offset + curve.arclength_mid())
        offset += curve.lengths.sum()
    speed = np.concatenate(speed_all)
    s = np.concatenate(s_all)
    vmax = float(speed.max())
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    interior_max = float(np.linalg.norm(field_arrays(sol.problem, sol, centroids), axis=1).max())
    warning = vmax <= 1e-10 * interior_max
    score = 0.0 if vmax == 0.0 else (vmax - float(speed.min())) / vmax
    return np.column_stack([s, speed]), score, float(speed.mean()), bool(warning)


# ------------------------------------------------------------ boundary fluxes


def boundary_flux(sol: EigenSolution) -> np.ndarray:
    """Consistent nodal boundary flux (K psi - mu M psi) over all vertices.

    Row i approximates the boundary integral of phi_i * dpsi/dn / r; rows of
    interior vertices vanish for an eigenpair.
    """
    pb = sol.problem
    mu = sol.lambda_plus**2
    return pb.K_full @ sol.psi - mu * (pb.M_full @ sol.psi)


def _normal_derivative_over_r(mesh: TriMesh, curve, F: np.ndarray) -> np.ndarray:
    """Solve the 1-D boundary mass system for q ~ (dpsi/dn) / r at chain vertices."""
    nodes = curve.vertices[:-1] if curve.closed else curve.vertices
    loc = np.full(mesh.n_vertices, -1)
    loc[nodes] = np.arange(len(nodes))
    a, b = loc[curve.edges[:, 0]], loc[curve.edges[:, 1]]
    L = curve.lengths
    I = np.concatenate([a, b, a, b])
    J = np.concatenate([a, b, b, a])
    W = np.concatenate([L / 3, L / 3, L / 6, L / 6])
    Mb = sp.csr_matrix((W, (I, J)), shape=(len(nodes), len(nodes)))
    q = splu(Mb.tocsc()).solve(F[nodes])
    return q[a], q[b]


def rellich_identity(sol: EigenSolution, mesh: TriMesh | None = None, origin_z: float = 0.0,
                     metric: str = "euclidean") -> tuple[float, float, float]:
    """Relative residual of  int_dM |X|^2 (Z.N) dA = int_M |X|^2 dV  with Z = x - (0, 0, origin_z).

    Returns ``(residual, volume_side, boundary_side)``.
    """
    if metric != "euclidean":
        raise DiagnosticError("the Rellich check is implemented for the Euclidean metric only")
    _check_nonzero(sol)
    mesh = mesh if mesh is not None else sol.problem.mesh
    pb = sol.problem
    psi, mu = sol.psi, sol.lambda_plus**2
    volume_side = 2 * math.pi * float(psi @ (pb.K_full @ psi) + mu * psi @ (pb.M_full @ psi))
    F = boundary_flux(sol)
    boundary_side = 0.0
    V = mesh.vertices
    for curve in outer_boundary(mesh):
        qa, qb = _normal_derivative_over_r(mesh, curve, F)
        pa, pb_ = V[curve.edges[:, 0]], V[curve.edges[:, 1]]
        for t in _GAUSS2:
            p = (1 - t) * pa + t * pb_
            q = (1 - t) * qa + t * qb
            r = p[:, 0]
            tang = np.divide(mu * sol.c_b**2, r**2, out=np.zeros_like(r), where=r > 0)
            zn = r * curve.normals[:, 0] + (p[:, 1] - origin_z) * curve.normals[:, 1]
            boundary_side += math.pi * float(np.sum(curve.lengths * (q**2 + tang) * zn * r))
    denom = max(abs(volume_side), abs(boundary_side))
    return abs(volume_side - boundary_side) / denom, volume_side, boundary_side


def criticality_gap(sol: EigenSolution, c_estimate: float, volume: float) -> float:
    """|int |X|^2 dV - 3 c^2 vol| / int |X|^2 dV (reported, never judged)."""
    pb = sol.problem
    psi, mu = sol.psi, sol.lambda_plus**2
    energy = 2 * math.pi * float(psi @ (pb.K_full @ psi) + mu * psi @ (pb.M_full @ psi))
    return abs(energy - 3 * c_estimate**2 * volume) / energy


# ------------------------------------------------------------------ g(X, R)


def g_xr_constancy(sol: EigenSolution, mesh: TriMesh | None = None):
    """g(X, R) = lam * psi along the outer boundary.

    Returns ``(samples, deviation, c0)`` with samples an (n, 2) array of
    (arclength, g(X, R)) at chain vertices and the deviation taken relative to
    max |lam psi| over the mesh.
    """
    _check_nonzero(sol)
    mesh = mesh if mesh is not None else sol.problem.mesh
    c0 = sol.lambda_plus * sol.c_b if sol.problem.has_boundary_unknown else 0.0
    rows, offset = [], 0.0
    for curve in outer_boundary(mesh):
        s = offset + np.concatenate([[0.0], np.cumsum(curve.lengths)])
        rows.append(np.column_stack([s, sol.lambda_plus * sol.psi[curve.vertices]]))
        offset = s[-1]
    samples = np.vstack(rows)
    deviation = float(np.max(np.abs(samples[:, 1] - c0))) / _field_scale(sol)
    return samples, deviation, float(c0)


# ------------------------------------------------------------- flux balance


def flux_balance(sol: EigenSolution, mesh: TriMesh | None = None) -> float:
    """|sum of boundary fluxes| / sum of |boundary fluxes| for torus-like solutions.

    The boundary integral of dpsi/dn / r is the pairing of X with the harmonic
    field R / |R|^2; it vanishes when X is orthogonal to that field.
    """
    if sol.topology != "torus_like":
        raise DiagnosticError("flux balance needs a torus-like solution (R/|R|^2 is singular on the axis)")
    _check_nonzero(sol)
    pb = sol.problem
    bnd = pb.mesh.tags != 0
    if np.ptp(sol.psi) == 0.0:
        raise DiagnosticError("constant stream function is not admissible")
    F = boundary_flux(sol)[bnd]
    return float(abs(F.sum()) / np.abs(F).sum())


# ------------------------------------------------------------------- report


def diagnose(sol: EigenSolution, shift_z: float = 5.0) -> DiagnosticsReport:
    mesh = sol.problem.mesh
    speed, score, c_est, warn = boundary_constancy(sol)
    rel = rellich_identity(sol)[0]
    rel_shift = rellich_identity(sol, origin_z=-shift_z)[0]
    vol = revolved_volume(mesh)
    gxr, dev, c0 = g_xr_constancy(sol)
    fb = flux_balance(sol) if sol.topology == "torus_like" else None
    return DiagnosticsReport(
        boundary_speed=speed.tolist(), constancy_score=score, c_estimate=c_est,
        vanishing_speed_warning=warn, rellich_residual=rel, rellich_residual_shifted=rel_shift,
        criticality_gap=criticality_gap(sol, c_est, vol), g_XR_boundary=gxr.tolist(),
        g_XR_deviation=dev, c0=c0, flux_balance=fb, lambda_plus=sol.lambda_plus, volume=vol,
        objective=sol.lambda_plus * vol ** (1.0 / 3.0),
    )


# -------------------------------------------------------------------- sweep


@dataclass
class SweepRow:
    parameter: float
    lambda_plus: float
    volume: float
    objective: float


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "lambda_plus", "volume", "objective"])
        for row in self.rows:
            w.writerow([repr(row.parameter), repr(row.lambda_plus), repr(row.volume), repr(row.objective)])
        return buf.getvalue()


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return min(4, os.cpu_count() or 1)
    n = int(raw)
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer")
    return n


def member_mesh(cs: CrossSection, h: float, volume_normalize: bool) -> TriMesh:
    """Mesh for one sweep member.

    With ``volume_normalize`` the member is meshed at unit revolved volume with
    spacing h and the mesh is scaled back, so congruent members of different
    size get similar meshes and the objective is scale invariant.
    """
    if not volume_normalize:
        return triangulate(cs, h)
    s = polygon_volume(cs) ** (1.0 / 3.0)
    return triangulate(cs.scaled(1.0 / s), h).scaled(s)


def _sweep_member(param: float, cs: CrossSection, h: float, volume_normalize: bool) -> SweepRow:
    mesh = member_mesh(cs, h, volume_normalize)
    sol = solve(mesh)
    vol = revolved_volume(mesh)
    return SweepRow(float(param), sol.lambda_plus, vol, sol.lambda_plus * vol ** (1.0 / 3.0))


def sweep(family, h: float, volume_normalize: bool = False, threads: int | None = None) -> SweepResult:
    """Solve every (parameter, CrossSection) member; rows sorted by parameter."""
    family = list(family)
    if len(family) < 2:
        raise ValueError("a sweep needs at least two members")
    order = sorted(range(len(family)), key=lambda i: family[i][0])
    threads = threads or thread_count()
    rows: list[SweepRow | None] = [None] * len(family)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {i: pool.submit(_sweep_member, family[i][0], family[i][1], h, volume_normalize) for i in order}
        for i in order:
            try:
                rows[i] = futures[i].result()
            except (ValueError, RuntimeError, TopologyError) as exc:
                raise SweepError(i, exc) from exc
    return SweepResult([rows[i] for i in order])
