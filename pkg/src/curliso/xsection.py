"""Cross-sections of solids of revolution and the axis-distance criterion.

A cross-section lives in the (r, z) half-plane.  Revolving it about the
z-axis produces the 3D domain.  All lengths are polygonal arc lengths in the
Euclidean (r, z) plane; the rotation field R = (-y, x, 0) has norm equal to
the distance to the axis, weighted by the conformal factor for the
hyperbolic and spherical ball charts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from shapely.geometry import LinearRing, Polygon

METRIC_KINDS = ("euclidean", "hyperbolic", "spherical")
AXIS_TOL = 1e-12
CORNER_ANGLE = math.radians(30.0)


class GeometryError(ValueError):
    """Invalid or unsupported cross-section geometry."""


def _as_curve(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"curve must be an (n, 2) array, got shape {pts.shape}")
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        raise GeometryError(f"closed curve needs at least 3 vertices, got {len(pts)}")
    return pts


def signed_area(curve: np.ndarray) -> float:
    r, z = curve[:, 0], curve[:, 1]
    return 0.5 * float(np.dot(r, np.roll(z, -1)) - np.dot(np.roll(r, -1), z))


def curve_length(curve: np.ndarray, closed: bool = True) -> float:
    pts = np.vstack([curve, curve[:1]]) if closed else curve
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def _orient(curve: np.ndarray, ccw: bool) -> np.ndarray:
    if (signed_area(curve) > 0) == ccw:
        return curve
    # reverse but keep vertex 0 first so indices stay predictable
    return np.vstack([curve[:1], curve[:0:-1]])


@dataclass(frozen=True)
class CrossSection:
    """Outer curve plus holes; outer is stored CCW, holes CW.

    Inputs with the opposite orientation are reversed on construction.
    """

    outer: np.ndarray
    holes: tuple = ()
    metric_kind: str = "euclidean"

    def __post_init__(self):
        if self.metric_kind not in METRIC_KINDS:
            raise GeometryError(f"unknown metric kind {self.metric_kind!r}")
        outer = _orient(_as_curve(self.outer), ccw=True)
        holes = tuple(_orient(_as_curve(h), ccw=False) for h in self.holes)
        for c in (outer, *holes):
            if np.any(c[:, 0] < 0):
                raise GeometryError("all vertices must satisfy r >= 0")
            if self.metric_kind != "euclidean" and np.any(np.sum(c**2, axis=1) >= 1.0):
                raise GeometryError("vertices must lie in the open unit ball chart")
            if not LinearRing(c).is_simple:
                raise GeometryError("curve is self-intersecting")
        outer_poly = Polygon(outer)
        hole_polys = [Polygon(h) for h in holes]
        for k, hp in enumerate(hole_polys):
            if not outer_poly.contains(hp) or outer_poly.exterior.intersects(hp.exterior):
                raise GeometryError(f"hole {k} is not strictly inside the outer curve")
            for j in range(k):
                if hp.intersects(hole_polys[j]):
                    raise GeometryError(f"holes {j} and {k} intersect")
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "holes", holes)

    @property
    def curves(self) -> tuple:
        return (self.outer, *self.holes)

    def translated(self, dz: float) -> "CrossSection":
        shift = np.array([0.0, dz])
        return CrossSection(self.outer + shift, tuple(h + shift for h in self.holes), self.metric_kind)

    def reflected(self) -> "CrossSection":
        flip = np.array([1.0, -1.0])
        return CrossSection(self.outer * flip, tuple(h * flip for h in self.holes), self.metric_kind)

    def scaled(self, s: float) -> "CrossSection":
        return CrossSection(self.outer * s, tuple(h * s for h in self.holes), self.metric_kind)

    def to_json(self) -> dict:
        return {
            "metric": self.metric_kind,
            "outer": self.outer.tolist(),
            "holes": [h.tolist() for h in self.holes],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CrossSection":
        if not isinstance(doc, dict):
            raise GeometryError("cross-section document must be a JSON object")
        unknown = set(doc) - {"metric", "outer", "holes", "format_version"}
        if unknown:
            raise GeometryError(f"unknown keys in cross-section: {sorted(unknown)}")
        if "outer" not in doc:
            raise GeometryError("cross-section needs an 'outer' curve")
        return cls(
            np.asarray(doc["outer"], dtype=float),
            tuple(np.asarray(h, dtype=float) for h in doc.get("holes", [])),
            doc.get("metric", "euclidean"),
        )


def load_cross_section(path) -> CrossSection:
    with open(path) as fh:
        return CrossSection.from_json(json.load(fh))


def polygon_volume(cs: CrossSection) -> float:
    """Volume of revolution of the polygonal region (exact Pappus sum)."""

    def moment(c):
        # integral of r over the polygon via the shoelace-type formula
        r0, z0 = c[:, 0], c[:, 1]
        r1, z1 = np.roll(r0, -1), np.roll(z0, -1)
        cross = r0 * z1 - r1 * z0
        return float(np.sum((r0 + r1) * cross)) / 6.0

    return 2.0 * math.pi * (moment(cs.outer) + sum(moment(h) for h in cs.holes))


# ---------------------------------------------------------------- resampling


def _corner_indices(curve: np.ndarray) -> list[int]:
    prev = curve - np.roll(curve, 1, axis=0)
    nxt = np.roll(curve, -1, axis=0) - curve
    turn = np.arctan2(prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0], np.sum(prev * nxt, axis=1))
    on_axis = curve[:, 0] <= AXIS_TOL
    axis_change = on_axis & ~(np.roll(on_axis, 1) & np.roll(on_axis, -1))
    return [int(i) for i in np.flatnonzero((np.abs(turn) > CORNER_ANGLE) | axis_change)]


def _sample_arc(pts: np.ndarray, n_seg: int) -> np.ndarray:
    """n_seg points evenly spaced in arc length along an open polyline (end excluded)."""
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    t = s[-1] * np.arange(n_seg) / n_seg
    return np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])


def resample(curve, spacing: float) -> np.ndarray:
    """Resample a closed polyline to arc-length spacing at most ``spacing``.

    Corners (turning angle above 30 degrees) and the ends of axis segments are
    kept, so polygonal inputs are reproduced exactly; smooth stretches between
    them are sampled uniformly.
    """
    pts = _as_curve(curve)
    if not spacing > 0:
        raise GeometryError("spacing must be positive")
    total = curve_length(pts)
    if total <= 0:
        raise GeometryError("zero-length curve")
    corners = _corner_indices(pts)
    closed = np.vstack([pts, pts[:1]])
    if not corners:
        n_seg = max(3, math.ceil(total / spacing * (1 - 1e-12)))
        return _sample_arc(closed, n_seg)
    out = []
    n = len(pts)
    for a, b in zip(corners, corners[1:] + [corners[0] + n]):
        arc = pts[[i % n for i in range(a, b + 1)]]
        length = curve_length(arc, closed=False)
        out.append(_sample_arc(arc, max(1, math.ceil(length / spacing * (1 - 1e-12)))))
    res = np.vstack(out)
    if len(res) < 3:
        res = _sample_arc(closed, 3)
    return res


# ------------------------------------------------------------- rotation norm


def killing_norm(p, metric_kind: str = "euclidean"):
    """Length of the rotation field R at (r, z) points, in the chosen metric."""
    p = np.asarray(p, dtype=float)
    r, z = p[..., 0], p[..., 1]
    if metric_kind == "euclidean":
        out = np.abs(r)
    elif metric_kind in ("hyperbolic", "spherical"):
        rho2 = r * r + z * z
        if np.any(rho2 >= 1.0):
            raise GeometryError("point lies outside the unit-ball chart")
        out = 2.0 * np.abs(r) / (1.0 - rho2 if metric_kind == "hyperbolic" else 1.0 + rho2)
    else:
        raise GeometryError(f"unknown metric kind {metric_kind!r}")
    return float(out) if out.ndim == 0 else out


def default_tol(d_minus: float) -> float:
    return 1e-9 * d_minus + 1e-12


class AxisDistance(NamedTuple):
    d_minus: float
    n0: np.ndarray
    axis_intersect: bool
    n0_indices: np.ndarray
    tol: float


def min_axis_distance(cs: CrossSection, tol: float | None = None) -> AxisDistance:
    """Closest distance of the outer curve to the axis and the set attaining it."""
    norms = killing_norm(cs.outer, cs.metric_kind)
    d_minus = float(norms.min())
    if tol is None:
        tol = default_tol(d_minus)
    if not tol > 0:
        raise GeometryError("tol must be positive")
    idx = np.flatnonzero(norms <= d_minus + tol)
    axis_intersect = bool(d_minus <= tol and np.any(cs.outer[:, 0] <= tol))
    return AxisDistance(d_minus, cs.outer[idx], axis_intersect, idx, tol)


def index_runs(idx: Sequence[int], n: int) -> list[list[int]]:
    """Split sorted indices on a cyclic polyline of n vertices into contiguous runs."""
    idx = sorted(int(i) for i in idx)
    if not idx:
        return []
    runs = [[idx[0]]]
    for i in idx[1:]:
        if i == runs[-1][-1] + 1:
            runs[-1].append(i)
        else:
            runs.append([i])
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == n - 1:
        runs[0] = runs.pop() + runs[0]
    return runs


def _arc(n: int, start: int, stop: int) -> list[int]:
    """Vertex indices walking forward from start to stop (inclusive) on an n-cycle."""
    steps = (stop - start) % n
    return [(start + k) % n for k in range(steps + 1)]


class BoundarySplit(NamedTuple):
    l_minus: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    l_minus_indices: list
    complement_indices: list


def split_boundary(cs: CrossSection, tol: float | None = None) -> BoundarySplit:
    """Divide the outer curve at the extremal-z points of the closest set.

    The near arc joins x_plus to x_minus and avoids the points farthest from
    the axis.  When both arcs reach the maximal distance the shorter one is
    taken.
    """
    ad = min_axis_distance(cs, tol)
    if ad.axis_intersect:
        raise GeometryError("cross-section meets the axis; the boundary split is undefined")
    outer, n = cs.outer, len(cs.outer)
    z = outer[ad.n0_indices, 1]
    # ties: largest index for x_plus, smallest for x_minus
    i_plus = int(ad.n0_indices[np.flatnonzero(z == z.max())[-1]])
    i_minus = int(ad.n0_indices[np.flatnonzero(z == z.min())[0]])
    if i_plus == i_minus:
        return BoundarySplit(outer[[i_plus]], outer[i_plus], outer[i_minus], [i_plus], _arc(n, i_plus, i_plus - 1 + n) + [i_plus])
    norms = killing_norm(outer, cs.metric_kind)
    far = norms >= norms.max() - default_tol(float(norms.max()))
    arc_a = _arc(n, i_plus, i_minus)
    arc_b = _arc(n, i_minus, i_plus)
    a_far = bool(np.any(far[arc_a[1:-1]]))
    b_far = bool(np.any(far[arc_b[1:-1]]))
    if a_far and not b_far:
        near, comp = arc_b[::-1], arc_a[::-1]
    elif b_far and not a_far:
        near, comp = arc_a, arc_b
    else:
        la = curve_length(outer[arc_a], closed=False)
        lb = curve_length(outer[arc_b], closed=False)
        near, comp = (arc_a, arc_b) if la <= lb else (arc_b[::-1], arc_a[::-1])
    return BoundarySplit(outer[near], outer[i_plus], outer[i_minus], near, comp)


# ------------------------------------------------------------------ criterion


@dataclass
class CriterionReport:
    d_minus: float
    d_plus: float
    n0_points: list
    x_plus: tuple | None
    x_minus: tuple | None
    len_L_minus: float
    len_L_plus: float
    len_holes: list
    axis_intersect: bool
    verdict: str
    metric: str = "euclidean"
    reason: str = ""
    n0_components: int = 0
    boundary_disconnected_by_n0: bool = False
    l_minus: np.ndarray | None = field(default=None, repr=False)
    l_plus_pieces: list = field(default_factory=list, repr=False)

    @property
    def rhs(self) -> float:
        return self.len_L_minus + sum(self.len_holes)

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "d_minus": self.d_minus,
            "d_plus": self.d_plus,
            "n0_points": [list(map(float, p)) for p in self.n0_points],
            "x_plus": None if self.x_plus is None else list(map(float, self.x_plus)),
            "x_minus": None if self.x_minus is None else list(map(float, self.x_minus)),
            "len_L_minus": self.len_L_minus,
            "len_L_plus": self.len_L_plus,
            "len_holes": list(self.len_holes),
            "rhs": self.rhs,
            "axis_intersect": self.axis_intersect,
            "n0_components": self.n0_components,
            "boundary_disconnected_by_n0": self.boundary_disconnected_by_n0,
            "verdict": self.verdict,
            "reason": self.reason,
        }


def _far_pieces(pts: np.ndarray, threshold: float, metric_kind: str) -> list[np.ndarray]:
    """Sub-polylines of an open polyline where the rotation norm is >= threshold."""
    norm = lambda q: killing_norm(q, metric_kind)  # noqa: E731
    vals = killing_norm(pts, metric_kind)
    pieces, cur = [], []
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        va, vb = vals[k] - threshold, vals[k + 1] - threshold
        if va >= 0 and vb >= 0:
            cur = cur or [a]
            cur.append(b)
            continue
        if va < 0 and vb < 0:
            if cur:
                pieces.append(np.array(cur))
                cur = []
            continue
        if metric_kind == "euclidean":
            t = va / (va - vb)
        else:
            t = brentq(lambda s: norm(a + s * (b - a)) - threshold, 0.0, 1.0, xtol=1e-15)
        cross = a + t * (b - a)
        if va >= 0:
            cur = cur or [a]
            cur.append(cross)
            pieces.append(np.array(cur))
            cur = []
        else:
            cur = [cross, b]
    if cur:
        pieces.append(np.array(cur))
    return [p for p in pieces if len(p) >= 2]


def criterion(cs: CrossSection, tol: float | None = None) -> CriterionReport:
    """Evaluate the axis / length non-optimality test for a cross-section."""
    ad = min_axis_distance(cs, tol)
    n = len(cs.outer)
    runs = index_runs(ad.n0_indices, n)
    n_components = len(runs) if len(ad.n0_indices) < n else 0
    len_holes = [curve_length(h) for h in cs.holes]
    if ad.axis_intersect:
        return CriterionReport(
            d_minus=ad.d_minus, d_plus=ad.d_minus, n0_points=ad.n0.tolist(), x_plus=None, x_minus=None,
            len_L_minus=0.0, len_L_plus=0.0, len_holes=len_holes, axis_intersect=True,
            verdict="not_optimal_axis", metric=cs.metric_kind, reason="domain meets the symmetry axis",
            n0_components=n_components, boundary_disconnected_by_n0=n_components >= 2,
        )
    split = split_boundary(cs, ad.tol)
    near_norms = killing_norm(split.l_minus, cs.metric_kind)
    d_plus = float(np.max(near_norms))
    for h in cs.holes:
        d_plus = max(d_plus, float(np.max(killing_norm(h, cs.metric_kind))))
    len_minus = curve_length(split.l_minus, closed=False) if len(split.l_minus) > 1 else 0.0
    pieces = _far_pieces(cs.outer[split.complement_indices], d_plus, cs.metric_kind)
    len_plus = float(sum(curve_length(p, closed=False) for p in pieces))
    if cs.metric_kind != "euclidean":
        verdict, reason = "inconclusive", "length inequality only established for the Euclidean metric"
    elif len_plus >= len_minus + sum(len_holes):
        verdict, reason = "not_optimal_length", "far arc at least as long as near arc plus holes"
    else:
        verdict, reason = "inconclusive", "far arc shorter than near arc plus holes"
    return CriterionReport(
        d_minus=ad.d_minus, d_plus=d_plus, n0_points=ad.n0.tolist(),
        x_plus=tuple(split.x_plus), x_minus=tuple(split.x_minus),
        len_L_minus=len_minus, len_L_plus=len_plus, len_holes=len_holes,
        axis_intersect=False, verdict=verdict, metric=cs.metric_kind, reason=reason,
        n0_components=n_components, boundary_disconnected_by_n0=n_components >= 2,
        l_minus=split.l_minus, l_plus_pieces=pieces,
    )


def criterion_svg(cs: CrossSection, report: CriterionReport, size: int = 480) -> str:
    """Annotated drawing: outer black, near arc blue, far arc red, holes purple, N0 green."""
    pts = np.vstack(cs.curves)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 0.05 * span
    scale = (size - 20) / (span + 2 * pad)

    def xy(p):
        return f"{(p[0] - lo[0] + pad) * scale + 10:.3f},{(hi[1] - p[1] + pad) * scale + 10:.3f}"

    def poly(c, color, closed, width=1.5):
        tag = "polygon" if closed else "polyline"
        path = " ".join(xy(p) for p in c)
        return f'<{tag} points="{path}" fill="none" stroke="{color}" stroke-width="{width}"/>'

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
        poly(cs.outer, "black", True),
    ]
    lines += [poly(h, "purple", True) for h in cs.holes]
    if report.l_minus is not None and len(report.l_minus) > 1:
        lines.append(poly(report.l_minus, "blue", False, 3))
    lines += [poly(p, "red", False, 3) for p in report.l_plus_pieces]
    for p in report.n0_points:
        x, y = xy(p).split(",")
        lines.append(f'<circle cx="{x}" cy="{y}" r="3" fill="green"/>')
    lines.append(f'<text x="12" y="{size - 8}" font-size="12">verdict: {report.verdict}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
