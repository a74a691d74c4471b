import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

import curliso.gseig as gseig
from curliso.gseig import (
    ConvergenceError, TopologyError, assemble, field_arrays, rayleigh_quotient, reconstruct, solve,
    solve_smallest,
)
from curliso.mesh2 import INTERIOR, refine_uniform, triangulate
from curliso.shapes import ball, circle, rectangle, torus
from curliso.xsection import CrossSection
from oracles import polar_fd_richardson, tan_root

TORUS_REF = 7.4879263  # polar finite-volume Richardson value, see test_oracles


@pytest.fixture(scope="module")
def ball_sol():
    return solve(triangulate(ball(), 0.02), k=3)


@pytest.fixture(scope="module")
def torus_sol():
    return solve(triangulate(torus(), 0.04), k=2)


def _sym(A):
    return abs(A - A.T).max() == 0


def test_rectangle_structure():
    m = triangulate(CrossSection(rectangle(1, 2, 0, 1)), 0.25)
    pb = assemble(m, "torus_like")
    n_int = int(np.sum(m.tags == INTERIOR))
    assert pb.n_dof == n_int + 1
    assert pb.has_boundary_unknown and pb.ell is not None
    assert _sym(pb.K) and _sym(pb.M)
    assert np.linalg.eigvalsh(pb.M.toarray()).min() > 0
    # ell is the 1/r-weighted integral of each (collapsed) basis function
    assert pb.ell.sum() == pytest.approx(math.log(2.0), rel=1e-3)


def test_ball_structure():
    m = triangulate(ball(), 0.2)
    pb = assemble(m)
    assert pb.topology == "ball_like" and pb.ell is None
    assert pb.n_dof == int(np.sum(m.tags == INTERIOR))
    assert _sym(pb.K)
    assert np.linalg.eigvalsh(pb.K.toarray()).min() > 0


def test_topology_errors():
    with pytest.raises(TopologyError):
        assemble(triangulate(ball(), 0.2), "torus_like")
    with pytest.raises(TopologyError):
        assemble(triangulate(torus(), 0.2), "ball_like")
    holed = CrossSection(circle((3, 0), 1.0, 256), (circle((3, 0), 0.3, 128),))
    with pytest.raises(TopologyError, match="multiply"):
        assemble(triangulate(holed, 0.1))


def test_ball_eigenvalue(ball_sol):
    ref = tan_root()
    assert abs(ball_sol.lambda_plus - ref) / ref < 5e-3
    assert ball_sol.residual_norm <= 1e-8
    # simple within the m = 0 reduction
    assert ball_sol.mu[1] > ball_sol.mu[0]
    assert ball_sol.eigen_gaps[0] == pytest.approx(ball_sol.lambda_plus, rel=1e-15)
    assert not ball_sol.near_degenerate


def test_ball_sign_convention(ball_sol):
    psi = ball_sol.psi
    assert psi[np.argmax(np.abs(psi))] > 0


def test_scaling_halves_lambda():
    m = triangulate(ball(), 0.05)
    a = solve(m).lambda_plus
    b = solve(m.scaled(2.0)).lambda_plus
    assert abs(b - a / 2) / (a / 2) < 1e-12


def test_torus_against_polar_oracle():
    m = triangulate(torus(), 0.04)
    coarse = solve(m).lambda_plus
    fine = solve(refine_uniform(m)).lambda_plus
    # the fine value must sit within the first-order Richardson estimate of the reference
    assert abs(fine - TORUS_REF) <= abs(coarse - fine)
    assert fine < coarse  # nested refinement lowers mu
    ref, err = polar_fd_richardson(2.0, 0.5, 20, 80)
    assert abs(ref - TORUS_REF) < 5 * err + 1e-4


def test_torus_constraint_and_residual(torus_sol):
    pb = torus_sol.problem
    x = torus_sol.coeffs
    assert abs(pb.ell @ x) <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(pb.ell)
    assert torus_sol.residual_norm <= 1e-8
    assert torus_sol.c_b != 0.0


def test_k_exceeds_dimension():
    pb = assemble(triangulate(CrossSection(rectangle(1, 2, 0, 1)), 0.5))
    with pytest.raises(ValueError, match="admissible"):
        solve_smallest(pb, k=pb.admissible_dim())


def test_convergence_error_reports_residual(monkeypatch):
    pb = assemble(triangulate(ball(), 0.2))

    def stuck(*a, **kw):
        raise spla.ArpackNoConvergence("stuck", np.array([1.0]), np.ones((pb.n_dof, 1)))

    monkeypatch.setattr(gseig, "eigsh", stuck)
    with pytest.raises(ConvergenceError) as info:
        solve_smallest(pb)
    assert math.isfinite(info.value.residual)


def test_zero_psi_gives_zero_samples(ball_sol):
    zero = ball_sol.with_psi(np.zeros_like(ball_sol.psi))
    pts = [(0.3, 0.1), (0.5, -0.5), (0.0, 0.2)]
    for s in reconstruct(zero.problem, zero, pts):
        assert s.components == (0.0, 0.0, 0.0)


def test_point_outside_mesh(ball_sol):
    with pytest.raises(ValueError):
        reconstruct(ball_sol.problem, ball_sol, [(2.0, 0.0)])


def test_fd_curl_matches_lambda_x(ball_sol):
    lam, d = ball_sol.lambda_plus, 0.01
    rng = np.random.default_rng(1)
    pts = []
    while len(pts) < 200:
        p = rng.uniform([0, -1], [1, 1])
        if np.hypot(*p) < 1 - 2 * d and p[0] > 2 * d:
            pts.append(p)
    pts = np.array(pts)
    r = pts[:, 0]

    def F(p):
        return field_arrays(ball_sol.problem, ball_sol, p, gradient="patch")

    X = F(pts)
    er, ez = np.array([d, 0]), np.array([0, d])
    Xrp, Xrm, Xzp, Xzm = F(pts + er), F(pts - er), F(pts + ez), F(pts - ez)
    curl = np.column_stack([
        -(Xzp[:, 1] - Xzm[:, 1]) / (2 * d),
        (Xzp[:, 0] - Xzm[:, 0]) / (2 * d) - (Xrp[:, 2] - Xrm[:, 2]) / (2 * d),
        ((r + d) * Xrp[:, 1] - (r - d) * Xrm[:, 1]) / (2 * d * r),
    ])
    rel = np.linalg.norm(curl - lam * X) / np.linalg.norm(lam * X)
    assert rel < 0.02


def test_torus_boundary_x_phi(torus_sol):
    m = torus_sol.problem.mesh
    bpts = m.vertices[m.tags != INTERIOR]
    X = field_arrays(torus_sol.problem, torus_sol, bpts)
    expect = torus_sol.lambda_plus * torus_sol.c_b / bpts[:, 0]
    assert np.abs(X[:, 1] - expect).max() <= 1e-12 * np.abs(expect).max()


def test_rayleigh_quotient_properties(torus_sol):
    pb = torus_sol.problem
    mu1 = torus_sol.mu1
    x = torus_sol.coeffs
    assert rayleigh_quotient(pb, x) == pytest.approx(mu1, rel=1e-12)
    rng = np.random.default_rng(3)
    v = gseig._project(pb, rng.standard_normal(pb.n_dof))
    y = x + 1e-3 * np.linalg.norm(x) * v / np.linalg.norm(v)
    q = rayleigh_quotient(pb, y)
    assert q >= mu1 * (1 - 1e-12)
    assert (q - mu1) / mu1 < 1e-4
    assert rayleigh_quotient(pb, 7 * y) == pytest.approx(q, rel=1e-14)
    with pytest.raises(ZeroDivisionError):
        rayleigh_quotient(pb, np.zeros(pb.n_dof))


@settings(max_examples=5, deadline=None)
@given(s=st.floats(0.3, 5.0), dz=st.floats(-3.0, 3.0))
def test_torus_scale_and_translation(s, dz):
    m = triangulate(torus(n=128), 0.15)
    base = solve(m).lambda_plus
    assert solve(m.scaled(s)).lambda_plus * s == pytest.approx(base, rel=1e-11)
    assert solve(m.translated(dz)).lambda_plus == pytest.approx(base, rel=1e-10)
