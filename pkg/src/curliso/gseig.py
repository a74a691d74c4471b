"""Smallest positive curl eigenvalue of axisymmetric domains (m = 0 mode).

An axisymmetric field X = grad(psi) x grad(phi) + lam * psi * grad(phi) is a
curl eigenfield exactly when the stream function solves the Grad-Shafranov
eigenproblem -div(grad(psi) / r) = lam^2 psi / r on the cross-section.  In
weak form this is the pencil (K, M) with

    K_ij = int grad(phi_i) . grad(phi_j) / r dA,   M_ij = int phi_i phi_j / r dA

on piecewise-linear elements.  Domains that touch the axis (ball-like) take
psi = 0 on the axis and the outer curve.  Domains away from the axis
(torus-like) take psi equal to a single free constant c_b on the boundary and
the side condition  int psi / r dA = 0, which is L2-orthogonality of X to the
harmonic field R / |R|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .mesh2 import AXIS, HOLE_BASE, INTERIOR, TriMesh

TOPOLOGIES = ("ball_like", "torus_like")

# degree-2 interior rule; keeps every sample point off the axis
_BARY3 = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


class TopologyError(ValueError):
    """Mesh tags incompatible with the requested topology or unsupported domain."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


def element_gradients(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the three barycentric functions per triangle, and the areas."""
    p = mesh.vertices[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    G = np.empty((len(p), 3, 2))
    G[:, 1, 0], G[:, 1, 1] = d2[:, 1] / det, -d2[:, 0] / det
    G[:, 2, 0], G[:, 2, 1] = -d1[:, 1] / det, d1[:, 0] / det
    G[:, 0] = -G[:, 1] - G[:, 2]
    return G, 0.5 * det


def assemble_full(mesh: TriMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Weighted stiffness and mass over all mesh vertices (no boundary conditions)."""
    T = mesh.triangles
    G, A = element_gradients(mesh)
    r = mesh.vertices[T][:, :, 0]
    rc = r.mean(axis=1)
    if np.any(rc <= 0):
        raise TopologyError("degenerate triangle on the axis")
    Ke = np.einsum("tia,tja->tij", G, G) * (A / rc)[:, None, None]
    rq = r @ _BARY3.T  # (t, q)
    Me = np.einsum("qi,qj,tq->tij", _BARY3, _BARY3, 1.0 / rq) * (A / 3.0)[:, None, None]
    n = mesh.n_vertices
    I = np.repeat(T, 3, axis=1).ravel()
    J = np.tile(T, (1, 3)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (I, J)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (I, J)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    M.sum_duplicates()
    return K, M


@dataclass(eq=False)
class GSProblem:
    mesh: TriMesh
    topology: str
    constrained: bool
    K: sp.csr_matrix
    M: sp.csr_matrix
    ell: np.ndarray | None
    P: sp.csr_matrix  # maps reduced unknowns to nodal values
    K_full: sp.csr_matrix = field(repr=False)
    M_full: sp.csr_matrix = field(repr=False)

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]

    @property
    def has_boundary_unknown(self) -> bool:
        return self.topology == "torus_like" and self.constrained

    def admissible_dim(self) -> int:
        return self.n_dof - (1 if self.ell is not None else 0)

    def to_nodal(self, coeffs) -> np.ndarray:
        return self.P @ np.asarray(coeffs, dtype=float)

    def from_nodal(self, psi) -> np.ndarray:
        """Restrict a nodal vector to the reduced unknowns (checks it is representable)."""
        psi = np.asarray(psi, dtype=float)
        counts = np.asarray(self.P.sum(axis=0)).ravel()
        coeffs = (self.P.T @ psi) / counts
        if not np.allclose(self.P @ coeffs, psi, rtol=0, atol=1e-12 * max(1.0, np.abs(psi).max())):
            raise ValueError("nodal vector violates the boundary conditions of this problem")
        return coeffs


def infer_topology(mesh: TriMesh) -> str:
    return "ball_like" if mesh.has_axis else "torus_like"


def assemble(mesh: TriMesh, topology: str = "auto", constrained: bool = True) -> GSProblem:
    """Build the reduced pencil for the chosen topology.

    ``constrained=False`` on a torus-like mesh drops the free boundary constant
    and the orthogonality condition, leaving plain psi = 0 on the boundary.
    """
    if topology == "auto":
        topology = infer_topology(mesh)
    if topology not in TOPOLOGIES:
        raise TopologyError(f"unknown topology {topology!r}")
    if np.any(mesh.tags >= HOLE_BASE):
        raise TopologyError("multiply-connected cross-sections unsupported")
    if topology == "ball_like" and not mesh.has_axis:
        raise TopologyError("ball_like topology needs vertices on the axis")
    if topology == "torus_like" and mesh.has_axis:
        raise TopologyError("torus_like topology forbids vertices on the axis")
    K_full, M_full = assemble_full(mesh)
    interior = np.flatnonzero(mesh.tags == INTERIOR)
    n, m = mesh.n_vertices, len(interior)
    ell = None
    if topology == "torus_like" and constrained:
        cols = np.full(n, m)
        cols[interior] = np.arange(m)
        P = sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, m + 1))
    else:
        P = sp.csr_matrix((np.ones(m), (interior, np.arange(m))), shape=(n, m))
    K = (P.T @ K_full @ P).tocsr()
    M = (P.T @ M_full @ P).tocsr()
    K = 0.5 * (K + K.T)
    M = 0.5 * (M + M.T)
    if topology == "torus_like" and constrained:
        ell = P.T @ (M_full @ np.ones(n))
    return GSProblem(mesh, topology, constrained, K.tocsr(), M.tocsr(), ell, P, K_full, M_full)


@dataclass(eq=False)
class EigenSolution:
    lambda_plus: float
    mu: np.ndarray  # k smallest admissible eigenvalues of the pencil
    psi: np.ndarray  # nodal stream function of the first mode
    coeffs: np.ndarray  # reduced unknowns of the first mode
    c_b: float
    residual_norm: float
    near_degenerate: bool
    topology: str
    constrained: bool
    problem: GSProblem = field(repr=False)
    label: str = "m = 0 upper bound"

    @property
    def eigen_gaps(self) -> np.ndarray:
        return np.sqrt(self.mu)

    @property
    def lambda_minus(self) -> float:
        return -self.lambda_plus

    @property
    def mu1(self) -> float:
        return float(self.mu[0])

    def with_psi(self, psi) -> "EigenSolution":
        """Same eigenvalue data with a replaced nodal stream function (for diagnostics)."""
        psi = np.asarray(psi, dtype=float)
        c_b = self.c_b
        if self.problem.has_boundary_unknown:
            c_b = float(psi[self.problem.mesh.tags != INTERIOR].mean())
        return EigenSolution(self.lambda_plus, self.mu, psi, self.coeffs, c_b, self.residual_norm,
                             self.near_degenerate, self.topology, self.constrained, self.problem, self.label)


def _start_vector(problem: GSProblem) -> np.ndarray:
    # smooth deterministic start: the 1/r-weighted "bubble" of ones
    v = problem.M @ np.ones(problem.n_dof)
    v = v + 1e-3 * np.cos(np.arange(problem.n_dof))
    if problem.ell is not None:
        v = _project(problem, v)
    return v


def _project(problem: GSProblem, v: np.ndarray) -> np.ndarray:
    """Remove the constant mode along ell (M-orthogonal projection onto ell^T v = 0)."""
    ones = np.ones(problem.n_dof)
    return v - ones * (problem.ell @ v) / (problem.ell @ ones)


def solve_smallest(problem: GSProblem, k: int = 1, max_iter: int | None = None, tol: float = 0.0) -> EigenSolution:
    """k smallest admissible eigenvalues by shift-invert Lanczos at shift 0."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k >= problem.admissible_dim():
        raise ValueError(f"k={k} exceeds the admissible dimension {problem.admissible_dim()}")
    K, M = problem.K, problem.M
    n = problem.n_dof
    if problem.ell is None:
        lu = splu(K.tocsc())
        op = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    else:
        ell = problem.ell[:, None]
        bordered = sp.bmat([[K, sp.csr_matrix(ell)], [sp.csr_matrix(ell.T), None]]).tocsc()
        lu = splu(bordered)

        def apply(b):
            return lu.solve(np.append(b, 0.0))[:n]

        op = LinearOperator((n, n), matvec=apply, dtype=float)
    ncv = min(n - 1, max(2 * k + 1, 20))
    try:
        w, V = eigsh(K, k=k, M=M, sigma=0.0, which="LM", OPinv=op, v0=_start_vector(problem),
                     ncv=ncv, maxiter=max_iter, tol=tol)
    except ArpackNoConvergence as exc:
        res = math.nan
        if len(exc.eigenvalues):
            x = exc.eigenvectors[:, 0]
            res = float(np.linalg.norm(K @ x - exc.eigenvalues[0] * (M @ x)) / np.linalg.norm(K @ x))
        raise ConvergenceError(f"eigensolver did not converge (residual {res:.3e})", res) from exc
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    if np.any(w <= 0):
        raise ConvergenceError("non-positive eigenvalue in the admissible space", math.nan)
    x = V[:, 0]
    if problem.ell is not None:
        x = _project(problem, x)
    x = x / math.sqrt(x @ (M @ x))
    psi = problem.to_nodal(x)
    if psi[np.argmax(np.abs(psi))] < 0:
        x, psi = -x, -psi
    mu1 = float(w[0])
    res = K @ x - mu1 * (M @ x)
    if problem.ell is not None:
        res = res - problem.ell * (problem.ell @ res) / (problem.ell @ problem.ell)
    residual = float(np.linalg.norm(res) / (mu1 * np.linalg.norm(M @ x)))
    if not residual <= 1e-8:
        raise ConvergenceError(f"eigenpair residual {residual:.3e} above 1e-8", residual)
    near = bool(np.any(np.diff(w) <= 1e-9 * w[1:])) if k > 1 else False
    c_b = float(x[-1]) if problem.has_boundary_unknown else 0.0
    return EigenSolution(math.sqrt(mu1), w, psi, x, c_b, residual, near, problem.topology,
                         problem.constrained, problem)


def solve(mesh: TriMesh, k: int = 1, topology: str = "auto", constrained: bool = True, **kw) -> EigenSolution:
    return solve_smallest(assemble(mesh, topology, constrained), k, **kw)


def rayleigh_quotient(problem: GSProblem, psi) -> float:
    """psi^T K psi / psi^T M psi for an admissible vector (reduced or nodal)."""
    psi = np.asarray(psi, dtype=float)
    if len(psi) == problem.mesh.n_vertices and len(psi) != problem.n_dof:
        psi = problem.from_nodal(psi)
    if len(psi) != problem.n_dof:
        raise ValueError("vector length does not match the problem")
    den = float(psi @ (problem.M @ psi))
    if den == 0.0:
        raise ZeroDivisionError("zero denominator in the Rayleigh quotient")
    if problem.ell is not None:
        scale = np.linalg.norm(psi) * np.linalg.norm(problem.ell)
        if abs(problem.ell @ psi) > 1e-8 * scale:
            raise ValueError("vector violates the orthogonality constraint")
    return float(psi @ (problem.K @ psi)) / den


# ------------------------------------------------------------ reconstruction


@dataclass(frozen=True)
class FieldSample:
    position: tuple
    components: tuple  # (X_r, X_phi, X_z), orthonormal cylindrical frame


def recovered_gradient(mesh: TriMesh, psi: np.ndarray) -> np.ndarray:
    """Nodal gradients from area-weighted averaging of the element gradients."""
    G, A = element_gradients(mesh)
    ge = np.einsum("tia,ti->ta", G, psi[mesh.triangles])
    acc = np.zeros((mesh.n_vertices, 2))
    wsum = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(acc, mesh.triangles[:, i], ge * A[:, None])
        np.add.at(wsum, mesh.triangles[:, i], A)
    return acc / wsum[:, None]


def _monomials(d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quadratic monomials of scaled offsets d, with their d/dr and d/dz."""
    x, y = d[..., 0:1], d[..., 1:2]
    ones, zeros = np.ones_like(x), np.zeros_like(x)
    P = np.concatenate([ones, x, y, x * x, x * y, y * y], axis=-1)
    Px = np.concatenate([zeros, ones, zeros, 2 * x, y, zeros], axis=-1)
    Py = np.concatenate([zeros, zeros, ones, zeros, x, 2 * y], axis=-1)
    return P, Px, Py


def patch_coefficients(mesh: TriMesh, psi: np.ndarray, rings: int = 3) -> np.ndarray:
    """Local quadratic least-squares fits of psi over vertex patches of the given ring depth."""
    T, n = mesh.triangles, mesh.n_vertices
    I = np.concatenate([T[:, 0], T[:, 1], T[:, 2], T[:, 1], T[:, 2], T[:, 0]])
    J = np.concatenate([T[:, 1], T[:, 2], T[:, 0], T[:, 0], T[:, 1], T[:, 2]])
    adj = (sp.csr_matrix((np.ones(len(I)), (I, J)), shape=(n, n)) + sp.eye(n)).tocsr()
    reach = adj
    for _ in range(rings - 1):
        reach = (reach @ adj).tocsr()
    V = mesh.vertices
    coef = np.zeros((n, 6))
    for i in range(n):
        nb = reach.indices[reach.indptr[i]:reach.indptr[i + 1]]
        P, _, _ = _monomials((V[nb] - V[i]) / mesh.h)
        coef[i] = np.linalg.lstsq(P, psi[nb], rcond=None)[0]
    return coef


def _patch_eval(mesh: TriMesh, coef: np.ndarray, pts, nodes, bary) -> tuple[np.ndarray, np.ndarray]:
    # barycentric blend of the three vertex fits
    P, Px, Py = _monomials((pts[:, None, :] - mesh.vertices[nodes]) / mesh.h)
    c = coef[nodes]
    val = np.einsum("nk,nkm,nkm->n", bary, P, c)
    grad = np.stack([np.einsum("nk,nkm,nkm->n", bary, D, c) for D in (Px, Py)], axis=1) / mesh.h
    return val, grad


def field_arrays(problem: GSProblem, sol: EigenSolution, points, gradient: str = "element") -> np.ndarray:
    """Field components (X_r, X_phi, X_z) at the points, shape (n, 3)."""
    mesh = problem.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri, bary = mesh.locate(pts)
    nodes = mesh.triangles[tri]
    psi = np.einsum("ni,ni->n", bary, sol.psi[nodes])
    if gradient == "element":
        G, _ = element_gradients(mesh)
        grad = np.einsum("nia,ni->na", G[tri], sol.psi[nodes])
    elif gradient == "recovered":
        if "recovered" not in mesh._cache or mesh._cache["recovered"][0] is not sol.psi:
            mesh._cache["recovered"] = (sol.psi, recovered_gradient(mesh, sol.psi))
        nodal = mesh._cache["recovered"][1]
        grad = np.einsum("ni,nia->na", bary, nodal[nodes])
    elif gradient == "patch":
        if "patch" not in mesh._cache or mesh._cache["patch"][0] is not sol.psi:
            mesh._cache["patch"] = (sol.psi, patch_coefficients(mesh, sol.psi))
        psi, grad = _patch_eval(mesh, mesh._cache["patch"][1], pts, nodes, bary)
    else:
        raise ValueError(f"unknown gradient mode {gradient!r}")
    lam = sol.lambda_plus
    r = pts[:, 0]
    out = np.zeros((len(pts), 3))
    off = r > 1e-12
    out[off, 0] = -grad[off, 1] / r[off]
    out[off, 1] = lam * psi[off] / r[off]
    out[off, 2] = grad[off, 0] / r[off]
    if np.any(~off):
        # on the axis psi ~ a(z) r^2, so X_z -> 2 a(z); sample a(z) half an element away
        delta = 0.5 * mesh.h
        near = pts[~off] + np.array([delta, 0.0])
        t2, b2 = mesh.locate(near)
        psi_near = np.einsum("ni,ni->n", b2, sol.psi[mesh.triangles[t2]])
        out[~off, 2] = 2.0 * psi_near / delta**2
    return out


def reconstruct(problem: GSProblem, sol: EigenSolution, points, gradient: str = "element") -> list[FieldSample]:
    """Axisymmetric Beltrami field X_r = -psi_z / r, X_phi = lam psi / r, X_z = psi_r / r.

    ``gradient="element"`` uses the linear shape functions of the containing
    triangle; ``"recovered"`` interpolates averaged nodal gradients, which is
    continuous and therefore usable under finite differencing; ``"patch"``
    blends local quadratic least-squares fits (three vertex rings), which is
    smooth enough for a finite-difference curl to be meaningful.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    X = field_arrays(problem, sol, pts, gradient)
    return [FieldSample(tuple(map(float, p)), tuple(map(float, x))) for p, x in zip(pts, X)]
