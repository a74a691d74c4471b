import json
import math

import numpy as np
import pytest

from curliso.diagnose import (
    DiagnosticError, SweepError, boundary_constancy, diagnose, flux_balance, g_xr_constancy,
    member_mesh, rellich_identity, sweep, thread_count,
)
from curliso.gseig import solve
from curliso.mesh2 import INTERIOR, revolved_volume, triangulate
from curliso.shapes import ball, circle, ellipse, torus
from curliso.xsection import CrossSection, polygon_volume
from oracles import ritz_ellipse, spheromak_psi, tan_root


@pytest.fixture(scope="module")
def ball_sol():
    return solve(triangulate(ball(), 0.02))


@pytest.fixture(scope="module")
def torus_sols():
    return {h: solve(triangulate(torus(), h)) for h in (0.08, 0.04, 0.02)}


@pytest.fixture(scope="module")
def ball_sols(ball_sol):
    out = {h: solve(triangulate(ball(), h)) for h in (0.08, 0.04)}
    out[0.02] = ball_sol
    return out


# ---------------------------------------------------------------- constancy


def test_ball_constancy_score(ball_sol):
    speed, score, c_est, warn = boundary_constancy(ball_sol)
    assert 0.9 < score <= 1.0
    assert not warn
    # closed form on the unit sphere: |X| = |d psi / d rho| / r, proportional to r
    lam = tan_root()
    eps = 1e-6
    th = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 2001)
    r, z = np.cos(th), np.sin(th)
    dpsi = (spheromak_psi((1 + eps) * r, (1 + eps) * z, lam) - spheromak_psi((1 - eps) * r, (1 - eps) * z, lam)) / (2 * eps)
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.where(r > 1e-12, np.abs(dpsi) / r, 0.0)
    exact_score = (exact.max() - exact.min()) / exact.max()
    assert exact_score == pytest.approx(1.0, abs=1e-9)
    # the discrete profile follows the same shape: |X| / max|X| against r at the midpoints
    s = speed[:, 0]
    th_mid = s / s[-1] * np.pi - 0.5 * np.pi
    prof = speed[:, 1] / speed[:, 1].max()
    assert np.abs(prof - np.cos(th_mid)).max() < 0.05


def test_constancy_scale_invariant(ball_sol):
    a = boundary_constancy(ball_sol)[1]
    b = boundary_constancy(ball_sol.with_psi(3 * ball_sol.psi))[1]
    assert abs(a - b) < 1e-12


def test_constancy_zero_field(ball_sol):
    with pytest.raises(DiagnosticError):
        boundary_constancy(ball_sol.with_psi(np.zeros_like(ball_sol.psi)))


# ------------------------------------------------------------------ Rellich


@pytest.mark.parametrize("which", ["ball", "torus"])
def test_rellich_decreases(which, ball_sols, torus_sols):
    sols = ball_sols if which == "ball" else torus_sols
    res = [rellich_identity(sols[h])[0] for h in (0.08, 0.04, 0.02)]
    assert res[2] < 0.02
    assert res[0] > res[1] > res[2] >= 0
    # order >= 1 over the two halvings
    assert math.log2(res[0] / res[2]) / 2 >= 1.0


@pytest.mark.parametrize("which", ["ball", "torus"])
def test_rellich_shifted_origin(which, ball_sol, torus_sols):
    sol = ball_sol if which == "ball" else torus_sols[0.02]
    assert rellich_identity(sol, origin_z=-5.0)[0] < 0.02
    moved = solve(sol.problem.mesh.translated(5.0))
    assert rellich_identity(moved)[0] < 0.02


def test_rellich_non_euclidean_rejected(ball_sol):
    with pytest.raises(DiagnosticError):
        rellich_identity(ball_sol, metric="hyperbolic")


# --------------------------------------------------------------- g(X, R)


def test_g_xr_torus(torus_sols):
    sol = torus_sols[0.04]
    samples, dev, c0 = g_xr_constancy(sol)
    assert dev < 1e-10
    assert c0 == pytest.approx(sol.lambda_plus * sol.c_b, rel=1e-15)


def test_g_xr_ball(ball_sol):
    _, dev, c0 = g_xr_constancy(ball_sol)
    assert c0 == 0.0 and dev < 1e-10


def test_g_xr_detects_perturbation(torus_sols):
    sol = torus_sols[0.04]
    V = sol.problem.mesh.vertices
    bump = 0.5 * np.abs(sol.psi).max() * np.cos(3 * np.arctan2(V[:, 1], V[:, 0] - 2.0))
    _, dev, _ = g_xr_constancy(sol.with_psi(sol.psi + bump))
    assert dev > 0.1


# ------------------------------------------------------------- flux balance


def test_flux_balance_constrained_vs_dirichlet(torus_sols):
    mesh = torus_sols[0.04].problem.mesh
    con = flux_balance(torus_sols[0.04])
    plain = flux_balance(solve(mesh, constrained=False))
    assert con < 1e-6
    assert plain > 1e-3
    assert plain >= 100 * con


def test_flux_balance_rejections(ball_sol, torus_sols):
    with pytest.raises(DiagnosticError):
        flux_balance(ball_sol)
    sol = torus_sols[0.08]
    with pytest.raises(DiagnosticError):
        flux_balance(sol.with_psi(np.ones_like(sol.psi)))


def test_report_fields(torus_sols):
    rep = diagnose(torus_sols[0.08])
    d = rep.to_dict()
    json.dumps(d)
    assert 0 <= d["constancy_score"] <= 1
    assert d["rellich_residual"] >= 0 and d["objective"] > 0
    assert d["flux_balance"] is not None


@pytest.mark.parametrize("dz", [-2.0, 3.5])
def test_invariance_under_translation_and_rescale(torus_sols, dz):
    sol = torus_sols[0.08]
    base = diagnose(sol)
    moved = diagnose(solve(sol.problem.mesh.translated(dz)))
    scaled = diagnose(sol.with_psi(-2.5 * sol.psi))
    assert abs(moved.constancy_score - base.constancy_score) < 1e-10
    assert abs(moved.objective - base.objective) < 1e-10 * base.objective
    assert abs(scaled.constancy_score - base.constancy_score) < 1e-10


# -------------------------------------------------------------------- sweep


def test_sweep_torus_centres_bit_for_bit():
    fam = [(R0, CrossSection(circle((R0, 0), 0.5, 256))) for R0 in (3.0, 1.5, 4.0, 2.0)]
    res = sweep(fam, 0.1, threads=2)
    assert [row.parameter for row in res.rows] == [1.5, 2.0, 3.0, 4.0]
    for row in res.rows:
        cs = dict(fam)[row.parameter]
        assert row.lambda_plus == solve(triangulate(cs, 0.1)).lambda_plus
    obj = np.array([row.objective for row in res.rows])
    assert np.all(np.isfinite(obj)) and np.all(obj > 0)
    # smooth: second differences small against the values
    assert np.abs(np.diff(obj, 2)).max() < 0.2 * obj.mean()
    assert res.to_csv().splitlines()[0].startswith("parameter")


def test_sweep_scale_constant():
    base = torus()
    fam = [(s, base.scaled(s)) for s in (1.0, 2.0, 4.0)]
    obj = [row.objective for row in sweep(fam, 0.05, volume_normalize=True).rows]
    assert max(obj) - min(obj) < 1e-10 * obj[0]


def test_sweep_ellipses_against_ritz():
    area = math.pi * 0.25
    fam = []
    for asp in (1.0, 1.5, 2.0):
        a, b = math.sqrt(area * asp / math.pi), math.sqrt(area / (math.pi * asp))
        fam.append((asp, CrossSection(ellipse((3, 0), a, b, 512))))
    rows = sweep(fam, 0.03).rows
    for (asp, cs), row in zip(fam, rows):
        a, b = math.sqrt(area * asp / math.pi), math.sqrt(area / (math.pi * asp))
        ref = ritz_ellipse(3.0, a, b)
        vol = 2 * math.pi * 3.0 * area
        assert row.lambda_plus == pytest.approx(ref, rel=1e-2)
        assert row.objective == pytest.approx(ref * vol ** (1 / 3), rel=1e-2)


def test_sweep_error_carries_index():
    holed = CrossSection(circle((3, 0), 1.0, 256), (circle((3, 0), 0.3, 128),))
    fam = [(0.0, torus(n=128)), (1.0, holed)]
    with pytest.raises(SweepError) as info:
        sweep(fam, 0.1)
    assert info.value.index == 1


def test_member_mesh_volume():
    cs = torus()
    m = member_mesh(cs, 0.05, True)
    assert revolved_volume(m) == pytest.approx(polygon_volume(cs), rel=1e-2)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("CURLISO_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("CURLISO_THREADS", "zero")
    with pytest.raises(ValueError):
        thread_count()
