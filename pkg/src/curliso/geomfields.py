"""Tensor calculus on the three conformally flat model charts.

Each model space is R^3 (or the open unit ball) with metric g = exp(2 phi) I:

    euclidean        phi = 0
    hyperbolic_ball  exp(2 phi) = 4 / (1 - |x|^2)^2   (Poincare ball, curvature -1)
    spherical_ball   exp(2 phi) = 4 / (1 + |x|^2)^2   (stereographic chart of S^3, curvature +1)

For a conformal metric the Christoffel symbols are

    Gamma^k_ij = d_ik dphi_j + d_jk dphi_i - d_ij dphi_k,

and div, curl and cross products pick up powers of exp(phi).  Vector fields
are given by closed-form components with optional closed-form Jacobians;
otherwise derivatives use Richardson-extrapolated central differences.

Hopf field on the spherical chart
---------------------------------
Inverse stereographic projection from the north pole sends u in R^3 to
P = (2u, |u|^2 - 1) / (1 + |u|^2) on S^3.  Pushing the unit Killing field
V(P) = (-P2, P1, -P4, P3) forward through sigma(P) = (P1, P2, P3) / (1 - P4),
d sigma(V) = V_123 / (1 - P4) + sigma(P) V_4 / (1 - P4), gives

    Y(u) = (u1 u3 - u2,  u1 + u2 u3,  (1 - |u|^2) / 2 + u3^2),

a Killing field of the chart metric with curl Y = 2 Y for the standard
orientation of the chart.  Projecting from the south pole instead reverses
orientation and yields the field with curl -2 Y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

KINDS = ("euclidean", "hyperbolic_ball", "spherical_ball")
CURVATURE = {"euclidean": 0.0, "hyperbolic_ball": -1.0, "spherical_ball": 1.0}
WEDGE_FLOOR = 1e-14

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS3[_i, _j, _k], _EPS3[_i, _k, _j] = 1.0, -1.0


class ChartError(ValueError):
    """Point outside the chart domain."""


@dataclass(frozen=True)
class ModelSpace:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model space {self.kind!r}; expected one of {KINDS}")

    @property
    def bounded(self) -> bool:
        return self.kind != "euclidean"

    @property
    def curvature(self) -> float:
        return CURVATURE[self.kind]

    def check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ChartError(f"expected a finite 3-vector, got {p!r}")
        if self.bounded and p @ p >= 1.0:
            raise ChartError(f"point {p.tolist()} lies outside the open unit ball")
        return p

    def phi(self, p) -> float:
        s = float(p @ p)
        if self.kind == "euclidean":
            return 0.0
        if self.kind == "hyperbolic_ball":
            return math.log(2.0 / (1.0 - s))
        return math.log(2.0 / (1.0 + s))

    def dphi(self, p) -> np.ndarray:
        s = float(p @ p)
        if self.kind == "euclidean":
            return np.zeros(3)
        if self.kind == "hyperbolic_ball":
            return 2.0 * p / (1.0 - s)
        return -2.0 * p / (1.0 + s)

    def hess_phi(self, p) -> np.ndarray:
        s = float(p @ p)
        if self.kind == "euclidean":
            return np.zeros((3, 3))
        if self.kind == "hyperbolic_ball":
            return 2.0 * np.eye(3) / (1.0 - s) + 4.0 * np.outer(p, p) / (1.0 - s) ** 2
        return -2.0 * np.eye(3) / (1.0 + s) + 4.0 * np.outer(p, p) / (1.0 + s) ** 2

    def factor(self, p) -> float:
        """exp(phi): ratio of g-length to Euclidean length."""
        return math.exp(self.phi(p))

    def metric(self, p) -> np.ndarray:
        return math.exp(2.0 * self.phi(p)) * np.eye(3)

    def inner(self, p, u, v) -> float:
        return math.exp(2.0 * self.phi(p)) * float(np.dot(u, v))

    def norm(self, p, v) -> float:
        return self.factor(p) * float(np.linalg.norm(v))

    def cross(self, p, u, v) -> np.ndarray:
        """Cross product for the metric volume form: g(u x v, w) = vol_g(u, v, w)."""
        return self.factor(p) * np.cross(u, v)

    def default_step(self, p) -> float:
        if not self.bounded:
            return 1e-4
        return 1e-4 * (1.0 - float(np.linalg.norm(p)))

    def random_points(self, n: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
        """Uniform samples in the ball |p| < radius (used for every chart)."""
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        return d * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]


# ------------------------------------------------------------------- fields

ROLES = ("concircular", "killing", "beltrami", "generic")


@dataclass(frozen=True)
class FieldSpec:
    name: str
    func: Callable[[np.ndarray], np.ndarray]
    role: str = "generic"
    jac: Callable[[np.ndarray], np.ndarray] | None = None  # J[k, i] = d_i Y^k

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown field role {self.role!r}")

    def __call__(self, p) -> np.ndarray:
        return np.asarray(self.func(np.asarray(p, dtype=float)), dtype=float)


def richardson_derivative(f: Callable, p: np.ndarray, step: float) -> np.ndarray:
    """D[..., i] = d f / d x_i by fourth-order Richardson central differences."""
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0

        def central(hh):
            return (np.asarray(f(p + hh * e)) - np.asarray(f(p - hh * e))) / (2.0 * hh)

        cols.append((4.0 * central(0.5 * step) - central(step)) / 3.0)
    return np.stack(cols, axis=-1)


def jacobian(space: ModelSpace, Y: FieldSpec, p, step: float | None = None) -> np.ndarray:
    p = space.check(p)
    if Y.jac is not None:
        return np.asarray(Y.jac(p), dtype=float)
    return richardson_derivative(Y, p, step or space.default_step(p))


def position_field() -> FieldSpec:
    return FieldSpec("position", lambda p: p.copy(), "concircular", lambda p: np.eye(3))


def rotation_field() -> FieldSpec:
    J = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return FieldSpec("rotation", lambda p: np.array([-p[1], p[0], 0.0]), "killing", lambda p: J)


def constant_field(v, name: str | None = None, role: str = "generic") -> FieldSpec:
    v = np.asarray(v, dtype=float)
    return FieldSpec(name or f"constant{tuple(v.tolist())}", lambda p: v.copy(), role, lambda p: np.zeros((3, 3)))


def hopf_field() -> FieldSpec:
    def func(u):
        s = u @ u
        return np.array([u[0] * u[2] - u[1], u[0] + u[1] * u[2], 0.5 * (1.0 - s) + u[2] ** 2])

    def jac(u):
        return np.array([[u[2], -1.0, u[0]], [1.0, u[2], u[1]], [-u[0], -u[1], u[2]]])

    return FieldSpec("hopf", func, "beltrami", jac)


def potential(kind: str) -> Callable[[np.ndarray], float]:
    """Potential f of the position field: nabla_X Z = f X."""
    if kind == "euclidean":
        return lambda p: 1.0
    if kind == "hyperbolic_ball":
        return lambda p: (1.0 + p @ p) / (1.0 - p @ p)
    if kind == "spherical_ball":
        return lambda p: (1.0 - p @ p) / (1.0 + p @ p)
    raise ValueError(kind)


# --------------------------------------------------------------- connection


def christoffel(space: ModelSpace, p) -> np.ndarray:
    """G[k, i, j] = Gamma^k_ij."""
    p = space.check(p)
    d = space.dphi(p)
    I = np.eye(3)
    return (np.einsum("ik,j->kij", I, d) + np.einsum("jk,i->kij", I, d) - np.einsum("ij,k->kij", I, d))


def christoffel_derivative(space: ModelSpace, p) -> np.ndarray:
    """dG[k, i, j, l] = d_l Gamma^k_ij."""
    H = space.hess_phi(space.check(p))
    I = np.eye(3)
    return (np.einsum("ik,jl->kijl", I, H) + np.einsum("jk,il->kijl", I, H) - np.einsum("ij,kl->kijl", I, H))


def christoffel_fd(space: ModelSpace, p, step: float = 1e-4) -> np.ndarray:
    """Christoffel symbols from finite differences of the metric (reference path)."""
    p = space.check(p)
    dg = richardson_derivative(space.metric, p, step)  # dg[a, b, c] = d_c g_ab
    ginv = np.linalg.inv(space.metric(p))
    t = np.einsum("jli->ijl", dg) + np.einsum("ilj->ijl", dg) - np.einsum("ijl->ijl", dg)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, t)


def nabla(space: ModelSpace, Y: FieldSpec, p, step: float | None = None) -> np.ndarray:
    """A[k, i] = (nabla_i Y)^k, so that nabla_X Y = A X."""
    p = space.check(p)
    return jacobian(space, Y, p, step) + np.einsum("kij,j->ki", christoffel(space, p), Y(p))


def covariant_derivative(space: ModelSpace, X, Y: FieldSpec, p, step: float | None = None) -> np.ndarray:
    """nabla_X Y at p; X may be a FieldSpec or a tangent vector at p."""
    p = space.check(p)
    x = X(p) if isinstance(X, FieldSpec) else np.asarray(X, dtype=float)
    return nabla(space, Y, p, step) @ x


def divergence(space: ModelSpace, X: FieldSpec, p) -> float:
    p = space.check(p)
    return float(np.trace(jacobian(space, X, p)) + 3.0 * space.dphi(p) @ X(p))


def curl(space: ModelSpace, X: FieldSpec, p) -> np.ndarray:
    p = space.check(p)
    J = jacobian(space, X, p)
    curl_e = np.einsum("ijk,kj->i", _EPS3, J)
    return math.exp(-space.phi(p)) * (curl_e + 2.0 * np.cross(space.dphi(p), X(p)))


def curl_div(space: ModelSpace, X: FieldSpec, p) -> tuple[np.ndarray, float]:
    return curl(space, X, p), divergence(space, X, p)


# -------------------------------------------------------------- residuals


def concircular_residual(space: ModelSpace, Z: FieldSpec, f: Callable, points) -> tuple[float, float]:
    """(max |nabla_e_i Z - f e_i|_g, max |div Z - 3 f|) over the points."""
    rel = div = 0.0
    for p in np.atleast_2d(points):
        p = space.check(p)
        A = nabla(space, Z, p)
        fp = float(f(p))
        D = A - fp * np.eye(3)
        rel = max(rel, max(space.norm(p, D[:, i]) for i in range(3)))
        div = max(div, abs(divergence(space, Z, p) - 3.0 * fp))
    return rel, div


def killing_residual(space: ModelSpace, Y: FieldSpec, points) -> float:
    """Max g-norm of the symmetrised covariant derivative of Y.

    With the index lowered by g = exp(2 phi) I the g-norm of a 2-tensor
    equals exp(-2 phi) times its Frobenius norm, which cancels the factor.
    """
    worst = 0.0
    for p in np.atleast_2d(points):
        A = nabla(space, Y, p)
        worst = max(worst, float(np.linalg.norm(0.5 * (A + A.T))))
    return worst


@dataclass(frozen=True)
class CurvatureSample:
    point: tuple
    X: tuple
    Z: tuple
    sec: float
    rm: float
    wedge_norm_sq: float


def riemann(space: ModelSpace, p) -> np.ndarray:
    """R[l, i, j, k] with R(d_i, d_j) d_k = R^l_ijk d_l."""
    G = christoffel(space, p)
    dG = christoffel_derivative(space, p)
    return (np.einsum("ljki->lijk", dG) - np.einsum("likj->lijk", dG)
            + np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G))


def rm4(space: ModelSpace, p, a, b, c, d) -> float:
    """Rm(a, b, c, d) = g(R(a, b) c, d)."""
    R = riemann(space, p)
    v = np.einsum("lijk,i,j,k->l", R, a, b, c)
    return space.inner(p, v, d)


def wedge_norm_sq(space: ModelSpace, p, X, Z) -> float:
    return space.inner(p, X, X) * space.inner(p, Z, Z) - space.inner(p, X, Z) ** 2


def sectional_curvature(space: ModelSpace, p, X, Z) -> CurvatureSample:
    p = space.check(p)
    X, Z = np.asarray(X, dtype=float), np.asarray(Z, dtype=float)
    rm = rm4(space, p, X, Z, Z, X)
    w = wedge_norm_sq(space, p, X, Z)
    sec = rm / w if w > WEDGE_FLOOR else 0.0
    return CurvatureSample(tuple(p.tolist()), tuple(X.tolist()), tuple(Z.tolist()), sec, rm, w)


class KillingGuardError(ValueError):
    """Field offered as Killing fails the Killing test."""


def _nabla_yy(space: ModelSpace, Y: FieldSpec) -> Callable[[np.ndarray], np.ndarray]:
    return lambda q: nabla(space, Y, q) @ Y(q)


def s7l1_terms(space: ModelSpace, X, Y: FieldSpec, p) -> tuple[float, float, float]:
    """(Rm(X,Y,Y,X), |nabla_X Y|^2_g, g(X, nabla_X nabla_Y Y)) at p."""
    p = space.check(p)
    x = X(p) if isinstance(X, FieldSpec) else np.asarray(X, dtype=float)
    y = Y(p)
    nxy = covariant_derivative(space, x, Y, p)
    W = _nabla_yy(space, Y)
    dW = richardson_derivative(W, p, space.default_step(p))
    nxw = dW @ x + np.einsum("kij,i,j->k", christoffel(space, p), x, W(p))
    return rm4(space, p, x, y, y, x), space.inner(p, nxy, nxy), space.inner(p, x, nxw)


def s7l1_residual(space: ModelSpace, X, Y: FieldSpec, points, guard: float = 1e-5) -> float:
    """Max over points of |sec(X,Y)|X^Y|^2 - |nabla_X Y|^2 - g(X, nabla_X nabla_Y Y)|.

    ``X`` may be a FieldSpec or a callable returning one tangent vector per point index.
    """
    points = np.atleast_2d(points)
    k = killing_residual(space, Y, points)
    if not k < guard:
        raise KillingGuardError(f"{Y.name} has Killing residual {k:.3e} >= {guard:g}")
    worst = 0.0
    for idx, p in enumerate(points):
        x = X(p) if isinstance(X, FieldSpec) else np.asarray(X(idx), dtype=float)
        sec = sectional_curvature(space, p, x, Y(p))
        _, a, b = s7l1_terms(space, x, Y, p)
        worst = max(worst, abs(sec.sec * sec.wedge_norm_sq - a - b))
    return worst


def beltrami_fit(space: ModelSpace, Y: FieldSpec, points) -> tuple[float, float]:
    """Least-squares lambda in curl Y = lambda Y, and the relative residual."""
    cy, yy, cc = 0.0, 0.0, 0.0
    curls, vals, pts = [], [], []
    for p in np.atleast_2d(points):
        c, y = curl(space, Y, p), Y(p)
        cy += space.inner(p, c, y)
        yy += space.inner(p, y, y)
        curls.append(c)
        vals.append(y)
        pts.append(p)
    if yy == 0.0:
        raise ValueError(f"{Y.name} vanishes at every sample point")
    lam = cy / yy
    for p, c, y in zip(pts, curls, vals):
        d = c - lam * y
        cc += space.inner(p, d, d)
    return lam, math.sqrt(cc / yy)


# ------------------------------------------------------------- verify suite


@dataclass
class Check:
    name: str
    tolerance: float
    measured: float
    comparison: str = "<"  # "<" : measured below tolerance passes; ">" : above

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.measured):
            return False
        return self.measured < self.tolerance if self.comparison == "<" else self.measured > self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "tolerance": self.tolerance, "comparison": self.comparison,
                "measured": self.measured, "passed": self.passed}


def _max(values) -> float:
    return float(max(values))


def verify_suite(seed: int = 20240601, n_points: int = 100, wrong_potential: bool = False) -> list[Check]:
    """Run every model-space check; ``wrong_potential`` injects f = 1 for the hyperbolic ball."""
    rng = np.random.default_rng(seed)
    spaces = {k: ModelSpace(k) for k in KINDS}
    pts = {k: spaces[k].random_points(n_points, rng) for k in KINDS}
    Zpos, R, hopf, e1 = position_field(), rotation_field(), hopf_field(), constant_field([1.0, 0, 0], "e1")
    checks: list[Check] = []

    for k, sp_ in spaces.items():
        checks.append(Check(f"dphi_closed_form[{k}]", 1e-8,
                            _max(np.abs(sp_.dphi(p) - richardson_derivative(sp_.phi, p, 1e-4)).max() for p in pts[k])))
    sph = spaces["spherical_ball"]
    checks.append(Check("christoffel_fd[spherical_ball]", 1e-7,
                        float(np.abs(christoffel(sph, [0.3, 0, 0]) - christoffel_fd(sph, [0.3, 0, 0])).max())))

    for k, sp_ in spaces.items():
        planes = rng.normal(size=(n_points, 2, 3))
        err = _max(abs(sectional_curvature(sp_, p, a, b).sec - sp_.curvature) for p, (a, b) in zip(pts[k], planes))
        checks.append(Check(f"sectional_curvature[{k}]", 1e-6, err))

    for k, sp_ in spaces.items():
        f = potential("euclidean") if (wrong_potential and k == "hyperbolic_ball") else potential(k)
        rel, div = concircular_residual(sp_, Zpos, f, pts[k])
        checks.append(Check(f"concircular_residual[{k}]", 1e-7, rel))
        checks.append(Check(f"concircular_divergence[{k}]", 1e-7, div))
    checks.append(Check("concircular_negative[euclidean,rotation]", 0.5,
                        concircular_residual(spaces["euclidean"], R, potential("euclidean"), pts["euclidean"])[0], ">"))

    checks.append(Check("killing_residual[euclidean,rotation]", 1e-10, killing_residual(spaces["euclidean"], R, pts["euclidean"])))
    checks.append(Check("killing_residual[hyperbolic_ball,rotation]", 1e-7,
                        killing_residual(spaces["hyperbolic_ball"], R, pts["hyperbolic_ball"])))
    checks.append(Check("killing_residual[spherical_ball,hopf]", 1e-6, killing_residual(sph, hopf, pts["spherical_ball"])))
    checks.append(Check("killing_negative[euclidean,position]", 0.1,
                        killing_residual(spaces["euclidean"], Zpos, pts["euclidean"]), ">"))

    euc = spaces["euclidean"]
    checks.append(Check("curl_div[euclidean,rotation]", 1e-12,
                        _max(np.abs(np.append(curl(euc, R, p) - [0, 0, 2], divergence(euc, R, p))).max() for p in pts["euclidean"])))
    checks.append(Check("curl_equals_2Y[spherical_ball,hopf]", 1e-6,
                        _max(sph.norm(p, curl(sph, hopf, p) - 2.0 * hopf(p)) for p in pts["spherical_ball"])))
    checks.append(Check("div_zero[spherical_ball,hopf]", 1e-6,
                        _max(abs(divergence(sph, hopf, p)) for p in pts["spherical_ball"])))

    lam_h, rel_h = beltrami_fit(sph, hopf, pts["spherical_ball"])
    checks.append(Check("beltrami_fit_lambda[spherical_ball,hopf]", 1e-6, abs(lam_h - 2.0)))
    checks.append(Check("beltrami_fit_residual[spherical_ball,hopf]", 1e-6, rel_h))
    lam_e, rel_e = beltrami_fit(euc, e1, pts["euclidean"])
    checks.append(Check("beltrami_fit_lambda[euclidean,e1]", 1e-8, abs(lam_e)))
    checks.append(Check("beltrami_fit_residual[euclidean,e1]", 1e-8, rel_e))
    checks.append(Check("beltrami_obstruction[hyperbolic_ball,rotation]", 0.1,
                        beltrami_fit(spaces["hyperbolic_ball"], R, pts["hyperbolic_ball"])[1], ">"))

    # Killing-Beltrami pairs: sec(X, Y) = lam^2 / 4 and nabla_X Y = (1/2) curl Y x X = (lam / 2) Y x X.
    # For Killing Y, g(nabla_X Y, W) = dY(X, W) / 2 = g(curl Y, X x W) / 2, hence the order Y x X.
    dirs = rng.normal(size=(n_points, 3))
    for k, sp_, Y, lam in (("spherical_ball", sph, hopf, lam_h), ("euclidean", euc, e1, lam_e)):
        sec_err = _max(abs(sectional_curvature(sp_, p, x, Y(p)).sec - lam**2 / 4.0) for p, x in zip(pts[k], dirs))
        checks.append(Check(f"sec_equals_lambda_sq_over_4[{k},{Y.name}]", 1e-5, sec_err))
        nab = 0.0
        for p in pts[k]:
            A = nabla(sp_, Y, p)
            for i in range(3):
                x = np.eye(3)[i]
                nab = max(nab, sp_.norm(p, A @ x - 0.5 * lam * sp_.cross(p, Y(p), x)))
        checks.append(Check(f"nabla_X_Y_cross[{k},{Y.name}]", 1e-5, nab))
        checks.append(Check(f"geodesic_nabla_Y_Y[{k},{Y.name}]", 1e-5,
                            _max(sp_.norm(p, nabla(sp_, Y, p) @ Y(p)) for p in pts[k])))

    pairs = (("euclidean", e1), ("euclidean", R), ("hyperbolic_ball", R), ("spherical_ball", hopf))
    for k, Y in pairs:
        checks.append(Check(f"s7l1_residual[{k},{Y.name}]", 1e-5,
                            s7l1_residual(spaces[k], lambda i: dirs[i], Y, pts[k])))
    return checks
