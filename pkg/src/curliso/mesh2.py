"""Triangulation of cross-sections, boundary tracing and revolved measures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .xsection import AXIS_TOL, CrossSection, GeometryError, resample

INTERIOR, OUTER, AXIS = 0, 1, 2
HOLE_BASE = 3  # hole k carries tag HOLE_BASE + k

FORMAT_VERSION = 1


def tag_name(tag: int) -> str:
    if tag == INTERIOR:
        return "interior"
    if tag == OUTER:
        return "outer"
    if tag == AXIS:
        return "axis"
    return f"hole:{tag - HOLE_BASE}"


def tag_value(name: str) -> int:
    names = {"interior": INTERIOR, "outer": OUTER, "axis": AXIS}
    if name in names:
        return names[name]
    if name.startswith("hole:"):
        return HOLE_BASE + int(name[5:])
    raise ValueError(f"unknown vertex tag {name!r}")


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    h: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def has_axis(self) -> bool:
        return bool(np.any(self.tags == AXIS))

    @property
    def n_holes(self) -> int:
        return int(np.count_nonzero(np.unique(self.tags) >= HOLE_BASE))

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(np.sum(self.areas()))

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.vertices[self.triangles]
        out = np.inf
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cos = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out = min(out, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
        return out

    def scaled(self, s: float) -> "TriMesh":
        return TriMesh(self.vertices * s, self.triangles.copy(), self.tags.copy(), self.h * s)

    def translated(self, dz: float) -> "TriMesh":
        return TriMesh(self.vertices + np.array([0.0, dz]), self.triangles.copy(), self.tags.copy(), self.h)

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Containing triangle and barycentric coordinates for each point.

        Raises GeometryError if a point lies outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if "tree" not in self._cache:
            p = self.vertices[self.triangles]
            self._cache["tree"] = cKDTree(p.mean(axis=1))
        tree = self._cache["tree"]
        n_tri = len(self.triangles)
        k = min(12, n_tri)
        _, cand = tree.query(pts, k=k)
        cand = np.asarray(cand).reshape(len(pts), k)
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        for i, p in enumerate(pts):
            for t_idx in (cand[i], np.arange(n_tri)):
                b = self._bary(t_idx, p)
                ok = np.flatnonzero(b.min(axis=1) >= -1e-10)
                if len(ok):
                    j = ok[np.argmax(b[ok].min(axis=1))]
                    tri[i], bary[i] = t_idx[j], b[j]
                    break
            else:
                raise GeometryError(f"point {tuple(p)} lies outside the mesh")
        return tri, bary

    def _bary(self, tris: np.ndarray, p: np.ndarray) -> np.ndarray:
        v = self.vertices[self.triangles[tris]]
        d1, d2, dp = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], p - v[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        b1 = (dp[:, 0] * d2[:, 1] - dp[:, 1] * d2[:, 0]) / det
        b2 = (d1[:, 0] * dp[:, 1] - d1[:, 1] * dp[:, 0]) / det
        return np.column_stack([1.0 - b1 - b2, b1, b2])


def feature_size(cs: CrossSection) -> float:
    """Smallest distance between distinct curves of the cross-section (inf without holes)."""
    from shapely.geometry import LinearRing

    rings = [LinearRing(c) for c in cs.curves]
    best = math.inf
    for i in range(len(rings)):
        for j in range(i):
            best = min(best, rings[i].distance(rings[j]))
    return best


def triangulate(cs: CrossSection, h: float, min_angle: float = 20.0) -> TriMesh:
    """Quality constrained Delaunay triangulation with target edge length h."""
    if not h > 0:
        raise GeometryError("h must be positive")
    if h >= feature_size(cs):
        raise GeometryError("h too large to resolve the gap between curves")
    curves = [resample(c, h) for c in cs.curves]
    for k, c in enumerate(curves[1:]):
        if len(c) < 6:
            raise GeometryError(f"h too large to resolve hole {k}")
    verts, segs, marks, hole_pts = [], [], [], []
    offset = 0
    for k, c in enumerate(curves):
        n = len(c)
        verts.append(c)
        segs.append(np.column_stack([np.arange(n), (np.arange(n) + 1) % n]) + offset)
        marks.append(np.full(n, 10 + k))
        offset += n
    from shapely.geometry import Polygon

    for c in curves[1:]:
        p = Polygon(c).representative_point()
        hole_pts.append([p.x, p.y])
    spec = {
        "vertices": np.vstack(verts),
        "segments": np.vstack(segs),
        "segment_markers": np.concatenate(marks)[:, None],
    }
    if hole_pts:
        spec["holes"] = np.array(hole_pts)
    max_area = math.sqrt(3.0) / 4.0 * h * h
    out = triangle.triangulate(spec, f"pq{min_angle:.6f}a{max_area:.20f}Q")
    V = np.asarray(out["vertices"], dtype=float)
    T = np.asarray(out["triangles"], dtype=np.int64)
    markers = np.asarray(out["vertex_markers"]).ravel()
    p = V[T]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = det < 0
    T[flip] = T[flip][:, [0, 2, 1]]
    tags = np.full(len(V), INTERIOR, dtype=np.int64)
    tags[markers == 10] = OUTER
    for k in range(1, len(curves)):
        tags[markers == 10 + k] = HOLE_BASE + k - 1
    tags[(tags == OUTER) & (V[:, 0] <= AXIS_TOL)] = AXIS
    if np.any((tags != AXIS) & (V[:, 0] <= 0)):
        raise GeometryError("mesh vertex on the axis outside an axis segment")
    return TriMesh(V, T, tags, float(h))


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four; the refined mesh is nested in the input."""
    T = mesh.triangles
    edges = np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    n = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[uniq[:, 0]] + mesh.vertices[uniq[:, 1]])
    ta, tb = mesh.tags[uniq[:, 0]], mesh.tags[uniq[:, 1]]
    boundary = counts == 1
    mtag = np.full(len(uniq), INTERIOR, dtype=np.int64)
    both_axis = boundary & (ta == AXIS) & (tb == AXIS)
    hole = boundary & ~both_axis & ((ta >= HOLE_BASE) | (tb >= HOLE_BASE))
    mtag[boundary] = OUTER
    mtag[both_axis] = AXIS
    mtag[hole] = np.maximum(ta, tb)[hole]
    m = len(T)
    e01, e12, e20 = (inv[:m] + n, inv[m:2 * m] + n, inv[2 * m:] + n)
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    newT = np.vstack([
        np.column_stack([a, e01, e20]),
        np.column_stack([e01, b, e12]),
        np.column_stack([e20, e12, c]),
        np.column_stack([e01, e12, e20]),
    ])
    return TriMesh(np.vstack([mesh.vertices, mid]), newT, np.concatenate([mesh.tags, mtag]), mesh.h / 2)


def revolved_volume(mesh: TriMesh) -> float:
    """2 pi times the integral of r over the cross-section (exact on each triangle)."""
    rc = mesh.vertices[mesh.triangles][:, :, 0].mean(axis=1)
    return float(2.0 * math.pi * np.sum(mesh.areas() * rc))


@dataclass
class BoundaryCurve:
    tag: int
    vertices: np.ndarray  # ordered vertex indices along the chain
    edges: np.ndarray  # (k, 2), oriented with the domain on the left
    normals: np.ndarray  # outward unit normals (n_r, n_z)
    lengths: np.ndarray
    closed: bool

    @property
    def name(self) -> str:
        return tag_name(self.tag)

    def midpoints(self, mesh: TriMesh) -> np.ndarray:
        return 0.5 * (mesh.vertices[self.edges[:, 0]] + mesh.vertices[self.edges[:, 1]])

    def arclength_mid(self) -> np.ndarray:
        return np.cumsum(self.lengths) - 0.5 * self.lengths


def _boundary_edges(mesh: TriMesh):
    T = mesh.triangles
    edges = np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        raise GeometryError("non-manifold mesh: edge shared by more than two triangles")
    return edges[counts[inv.ravel()] == 1]


def boundary_trace(mesh: TriMesh) -> list[BoundaryCurve]:
    """Ordered boundary chains per curve; axis edges come back as their own chains."""
    if "trace" in mesh._cache:
        return mesh._cache["trace"]
    bedges = _boundary_edges(mesh)
    ta, tb = mesh.tags[bedges[:, 0]], mesh.tags[bedges[:, 1]]
    etag = np.where((ta == AXIS) & (tb == AXIS), AXIS, np.where((ta >= HOLE_BASE) | (tb >= HOLE_BASE), np.maximum(ta, tb), OUTER))
    curves = []
    for tag in sorted(set(int(t) for t in etag)):
        sub = bedges[etag == tag]
        nxt = {}
        for a, b in sub:
            if a in nxt:
                raise GeometryError(f"non-manifold boundary at vertex {a}")
            nxt[int(a)] = int(b)
        heads = set(nxt) - set(nxt.values())
        chains = []
        remaining = dict(nxt)
        starts = sorted(heads) if heads else []
        while remaining:
            if starts:
                s = starts.pop(0)
            else:
                s = min(remaining)
            chain = [s]
            while chain[-1] in remaining:
                chain.append(remaining.pop(chain[-1]))
                if chain[-1] == s:
                    break
            chains.append(chain)
        for chain in chains:
            closed = chain[0] == chain[-1]
            e = np.column_stack([chain[:-1], chain[1:]])
            d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
            L = np.hypot(d[:, 0], d[:, 1])
            nrm = np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]
            curves.append(BoundaryCurve(tag, np.array(chain), e, nrm, L, closed))
    mesh._cache["trace"] = curves
    return curves


def outer_boundary(mesh: TriMesh) -> list[BoundaryCurve]:
    return [c for c in boundary_trace(mesh) if c.tag == OUTER]


# ------------------------------------------------------------------ text I/O


def dumps(mesh: TriMesh) -> str:
    lines = [f"trimesh format_version {FORMAT_VERSION}", f"h {mesh.h!r}", f"vertices {mesh.n_vertices}"]
    lines += [f"{r!r} {z!r} {tag_name(t)}" for (r, z), t in zip(mesh.vertices.tolist(), mesh.tags.tolist())]
    lines.append(f"triangles {len(mesh.triangles)}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def loads(text: str) -> TriMesh:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        head = lines[0].split()
        if head[:2] != ["trimesh", "format_version"] or int(head[2]) != FORMAT_VERSION:
            raise ValueError("bad header")
        h = float(lines[1].split()[1])
        nv = int(lines[2].split()[1])
        rows = [ln.split() for ln in lines[3:3 + nv]]
        V = np.array([[float(a), float(b)] for a, b, _ in rows])
        tags = np.array([tag_value(t) for _, _, t in rows], dtype=np.int64)
        nt = int(lines[3 + nv].split()[1])
        T = np.array([[int(x) for x in ln.split()] for ln in lines[4 + nv:4 + nv + nt]], dtype=np.int64).reshape(nt, 3)
    except (IndexError, ValueError) as exc:
        raise GeometryError(f"malformed mesh file: {exc}") from exc
    return TriMesh(V, T, tags, h)


def mesh_svg(mesh: TriMesh, size: int = 480) -> str:
    V = mesh.vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    span = float(max(hi - lo)) or 1.0
    scale = (size - 20) / span

    def xy(p):
        return f"{(p[0] - lo[0]) * scale + 10:.2f},{(hi[1] - p[1]) * scale + 10:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
           '<rect width="100%" height="100%" fill="white"/>']
    for t in mesh.triangles:
        pts = " ".join(xy(V[i]) for i in t)
        out.append(f'<polygon points="{pts}" fill="none" stroke="#555" stroke-width="0.4"/>')
    colors = {OUTER: "black", AXIS: "orange"}
    for c in boundary_trace(mesh):
        pts = " ".join(xy(V[i]) for i in c.vertices)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors.get(c.tag, "purple")}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
