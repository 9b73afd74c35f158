"""Triangle meshes with spatial queries.

Provides the `TriMesh` container (with optional per-vertex instance labels),
axis-aligned boxes, labeled point sample sets, and the BVH-accelerated
queries every other module builds on: point containment by ray parity,
exact nearest-surface distance, surface/volume point sampling, and
similarity transforms.

All spatial queries are read-only after the BVH is built and safe to call
from multiple threads; construction is single-writer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyMesh, NonWatertight
from .validation import GEOM_EPS, as_point, as_points, check_rotation

# Fixed ray directions for the parity test. The primary direction is
# deliberately irrational-looking so axis-aligned geometry never runs
# parallel to it; the fallbacks kick in on numerically grazing hits.
_RAY_DIRECTIONS = tuple(
    d / np.linalg.norm(d)
    for d in (
        np.array([0.5464148248224172, 0.6397196190803357, 0.5404020853449988]),
        np.array([-0.2914548182834994, 0.8403607804868283, -0.4572518331229327]),
        np.array([0.7071428566983345, -0.3254010034532948, 0.6277050283349375]),
    )
)

_BARY_EPS = 1e-9


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box, `vmin <= vmax` componentwise."""

    vmin: np.ndarray
    vmax: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vmin", as_point(self.vmin, "vmin"))
        object.__setattr__(self, "vmax", as_point(self.vmax, "vmax"))
        if np.any(self.vmin > self.vmax):
            raise ValueError("Aabb requires vmin <= vmax componentwise")

    @property
    def extent(self) -> np.ndarray:
        return self.vmax - self.vmin

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def padded(self, fraction: float) -> "Aabb":
        pad = fraction * self.extent
        return Aabb(self.vmin - pad, self.vmax + pad)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.vmin, other.vmin), np.maximum(self.vmax, other.vmax))

    def contains(self, points) -> np.ndarray:
        p = as_points(points)
        return np.all((p >= self.vmin) & (p <= self.vmax), axis=1)

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.vmin, self.vmax, size=(n, 3))


class SampleSource(Enum):
    """Provenance of a SampleSet, which decides loss routing downstream."""

    SYNTHETIC_INSTANCE = "synthetic_instance"
    SYNTHETIC_OBJECT_ONLY = "synthetic_object_only"
    REAL_UNION = "real_union"


@dataclass
class SampleSet:
    """Labeled 3D sample points with per-instance occupancy ground truth.

    Instance channels (`occ_human`, `occ_object`) are absent (None) for
    REAL_UNION sets; real scans carry only the union. When both instance
    channels are present the union channel equals their pointwise maximum.
    """

    points: np.ndarray
    source: SampleSource
    occ_human: np.ndarray | None = None
    occ_object: np.ndarray | None = None
    occ_union: np.ndarray | None = None

    def __post_init__(self):
        self.points = as_points(self.points, "points")
        n = len(self.points)
        for name in ("occ_human", "occ_object", "occ_union"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.uint8).reshape(-1)
                if len(v) != n:
                    raise ValueError(f"{name} length {len(v)} != n points {n}")
                setattr(self, name, v)
        if self.source is SampleSource.REAL_UNION:
            if self.occ_human is not None or self.occ_object is not None:
                raise ValueError("real-union samples must not carry instance channels")
        if self.occ_human is not None and self.occ_object is not None:
            union = np.maximum(self.occ_human, self.occ_object)
            if self.occ_union is None:
                self.occ_union = union
            elif not np.array_equal(self.occ_union, union):
                raise ValueError("occ_union must equal max(occ_human, occ_object)")

    def __len__(self) -> int:
        return len(self.points)


class TriMesh:
    """Indexed triangle mesh with optional per-vertex instance labels.

    Degenerate (zero-area) faces are dropped at construction with a warning;
    scan-derived meshes routinely contain slivers. Vertex labels use the
    dataset convention 0 = human/hand, 1 = object.
    """

    def __init__(self, vertices, faces, vertex_labels=None, area_eps: float = 1e-14):
        self.vertices = as_points(vertices, "vertices")
        f = np.asarray(faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError(f"faces must have shape (m, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(self.vertices)):
            raise ValueError("face indices out of range")
        keep = _nondegenerate_mask(self.vertices, f, area_eps)
        self.n_degenerate_dropped = int(len(f) - keep.sum())
        if self.n_degenerate_dropped:
            warnings.warn(
                f"dropped {self.n_degenerate_dropped} degenerate face(s)",
                stacklevel=2,
            )
        self.faces = np.ascontiguousarray(f[keep])
        if vertex_labels is not None:
            vertex_labels = np.asarray(vertex_labels, dtype=np.int32).reshape(-1)
            if len(vertex_labels) != len(self.vertices):
                raise ValueError("vertex_labels length must match vertex count")
        self.vertex_labels = vertex_labels
        self._bvh: _Bvh | None = None
        self._watertight: bool | None = None

    # -- basic properties ---------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def is_empty(self) -> bool:
        return self.n_faces == 0

    def aabb(self) -> Aabb:
        if self.n_vertices == 0:
            raise EmptyMesh("mesh has no vertices")
        return Aabb(self.vertices.min(axis=0), self.vertices.max(axis=0))

    def triangles(self) -> np.ndarray:
        """(m, 3, 3) array of face corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        return 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )

    def face_normals(self) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm == 0.0, 1.0, norm)

    def face_labels(self) -> np.ndarray:
        """Per-face instance id: majority of the three vertex labels."""
        from .errors import MissingLabels

        if self.vertex_labels is None:
            raise MissingLabels("mesh carries no vertex labels")
        lab = self.vertex_labels[self.faces]  # (m, 3)
        # labels are 0/1; majority = value occurring at least twice
        return (lab.sum(axis=1) >= 2).astype(np.int32)

    def signed_volume(self) -> float:
        """Enclosed volume by the divergence theorem; positive for outward winding."""
        tri = self.triangles()
        return float(np.einsum("ij,ij->", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])) / 6.0)

    def euler_characteristic(self) -> int:
        edges = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        used = np.unique(self.faces)
        return int(len(used) - n_edges + self.n_faces)

    def is_watertight(self) -> bool:
        """Every edge shared by exactly two faces with opposite direction."""
        if self._watertight is None:
            self._watertight = self._check_watertight()
        return self._watertight

    def _check_watertight(self) -> bool:
        if self.is_empty():
            return False
        e = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        n = self.n_vertices
        directed = e[:, 0] * n + e[:, 1]
        if len(np.unique(directed)) != len(directed):
            return False  # repeated directed edge: inconsistent winding
        undirected = np.sort(e, axis=1)
        keys, counts = np.unique(undirected[:, 0] * n + undirected[:, 1], return_counts=True)
        return bool(np.all(counts == 2))

    def require_watertight(self, what: str = "operation"):
        if not self.is_watertight():
            raise NonWatertight(f"{what} requires a closed, consistently wound mesh")

    def with_labels(self, labels) -> "TriMesh":
        m = TriMesh.__new__(TriMesh)
        m.vertices = self.vertices
        m.faces = self.faces
        m.n_degenerate_dropped = self.n_degenerate_dropped
        labels = np.asarray(labels, dtype=np.int32).reshape(-1)
        if len(labels) != self.n_vertices:
            raise ValueError("labels length must match vertex count")
        m.vertex_labels = labels
        m._bvh = self._bvh
        m._watertight = self._watertight
        return m

    def bvh(self) -> "_Bvh":
        if self._bvh is None:
            if self.is_empty():
                raise EmptyMesh("cannot build BVH over an empty mesh")
            self._bvh = _Bvh(self.vertices, self.faces)
        return self._bvh


def _nondegenerate_mask(vertices, faces, area_eps: float) -> np.ndarray:
    """Faces to keep. area_eps <= 0 keeps index-distinct zero-area slivers
    (needed by surface extractors whose closure depends on them)."""
    if len(faces) == 0:
        return np.zeros(0, dtype=bool)
    distinct = (
        (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    )
    if area_eps <= 0.0:
        return distinct
    tri = vertices[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    return distinct & (areas > area_eps)


# ---------------------------------------------------------------------------
# BVH
# ---------------------------------------------------------------------------


class _Bvh:
    """Median-split BVH over triangles, stored as flat numpy arrays.

    Queries are batched: traversal keeps (node, point-subset) pairs on an
    explicit stack so the per-node work is vectorized over the subset.
    """

    LEAF_SIZE = 8

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        tri = vertices[faces]
        self.tri_a = np.ascontiguousarray(tri[:, 0])
        self.tri_b = np.ascontiguousarray(tri[:, 1])
        self.tri_c = np.ascontiguousarray(tri[:, 2])
        self._e1 = self.tri_b - self.tri_a
        self._e2 = self.tri_c - self.tri_a
        self._det_scale = np.linalg.norm(self._e1, axis=1) * np.linalg.norm(self._e2, axis=1)
        tmin = tri.min(axis=1)
        tmax = tri.max(axis=1)
        cent = tri.mean(axis=1)
        self.diag = float(np.linalg.norm(tmax.max(axis=0) - tmin.min(axis=0)))

        order = np.arange(len(faces))
        node_min, node_max = [], []
        node_left, node_right, node_leaf_start, node_leaf_count = [], [], [], []

        def build(lo: int, hi: int) -> int:
            idx = order[lo:hi]
            me = len(node_min)
            node_min.append(tmin[idx].min(axis=0))
            node_max.append(tmax[idx].max(axis=0))
            node_left.append(-1)
            node_right.append(-1)
            node_leaf_start.append(-1)
            node_leaf_count.append(0)
            if hi - lo <= self.LEAF_SIZE:
                node_leaf_start[me] = lo
                node_leaf_count[me] = hi - lo
                return me
            axis = int(np.argmax(node_max[me] - node_min[me]))
            mid = (lo + hi) // 2
            part = np.argsort(cent[idx, axis], kind="stable")
            order[lo:hi] = idx[part]
            node_left[me] = build(lo, mid)
            node_right[me] = build(mid, hi)
            return me

        import sys

        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 100000))
        try:
            build(0, len(faces))
        finally:
            sys.setrecursionlimit(old)

        self.order = order
        self.node_min = np.asarray(node_min)
        self.node_max = np.asarray(node_max)
        self.node_left = np.asarray(node_left, dtype=np.int64)
        self.node_right = np.asarray(node_right, dtype=np.int64)
        self.leaf_start = np.asarray(node_leaf_start, dtype=np.int64)
        self.leaf_count = np.asarray(node_leaf_count, dtype=np.int64)

    # -- ray parity ---------------------------------------------------------

    def ray_parity(self, points: np.ndarray) -> np.ndarray:
        """Crossing-parity inside test for a batch of points.

        Casts along a fixed direction; points whose hits are numerically
        grazing are re-cast along fallback directions so the result is
        deterministic.
        """
        n = len(points)
        inside = np.zeros(n, dtype=bool)
        pending = np.arange(n)
        for d in _RAY_DIRECTIONS:
            counts, unreliable = self._parity_single(points[pending], d)
            inside[pending] = counts % 2 == 1
            pending = pending[unreliable]
            if len(pending) == 0:
                break
        return inside

    def _parity_single(self, points: np.ndarray, d: np.ndarray):
        n = len(points)
        counts = np.zeros(n, dtype=np.int64)
        unreliable = np.zeros(n, dtype=bool)
        if n == 0:
            return counts, unreliable
        eps_t = 1e-9 * max(self.diag, 1e-30)
        inv = np.where(d != 0.0, 1.0 / np.where(d == 0.0, 1.0, d), np.inf)
        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            sel = self._slab_hit(node, points[idx], d, inv)
            idx = idx[sel]
            if len(idx) == 0:
                continue
            if self.leaf_count[node] > 0:
                lo = self.leaf_start[node]
                tris = self.order[lo : lo + self.leaf_count[node]]
                hits, graze = self._moller_trumbore(points[idx], d, tris, eps_t)
                np.add.at(counts, idx, hits)
                unreliable[idx] |= graze
            else:
                stack.append((int(self.node_left[node]), idx))
                stack.append((int(self.node_right[node]), idx))
        return counts, unreliable

    def _slab_hit(self, node: int, pts: np.ndarray, d: np.ndarray, inv: np.ndarray) -> np.ndarray:
        bmin, bmax = self.node_min[node], self.node_max[node]
        with np.errstate(invalid="ignore"):
            t1 = (bmin - pts) * inv
            t2 = (bmax - pts) * inv
        par = d == 0.0
        lo = np.where(par, -np.inf, np.minimum(t1, t2))
        hi = np.where(par, np.inf, np.maximum(t1, t2))
        ok_par = np.all(~par | ((pts >= bmin) & (pts <= bmax)), axis=1)
        tmin = lo.max(axis=1)
        tmax = hi.min(axis=1)
        return ok_par & (tmax >= np.maximum(tmin, 0.0))

    def _moller_trumbore(self, pts: np.ndarray, d: np.ndarray, tris: np.ndarray, eps_t: float):
        a = self.tri_a[tris]
        e1 = self._e1[tris]
        e2 = self._e2[tris]
        h = np.cross(d, e2)  # (m, 3)
        det = np.einsum("mj,mj->m", e1, h)
        near_par = np.abs(det) < 1e-12 * np.maximum(self._det_scale[tris], 1e-300)
        safe_det = np.where(near_par, 1.0, det)
        s = pts[:, None, :] - a[None, :, :]  # (k, m, 3)
        u = np.einsum("kmj,mj->km", s, h) / safe_det
        q = np.cross(s, e1[None, :, :])
        v = np.einsum("kmj,j->km", q, d) / safe_det
        t = np.einsum("kmj,mj->km", q, e2) / safe_det
        w = 1.0 - u - v
        plane_hit = ~near_par[None, :] & (t > eps_t)
        hit = plane_hit & (u >= 0.0) & (v >= 0.0) & (w >= 0.0)
        near_edge = (np.abs(u) < _BARY_EPS) | (np.abs(v) < _BARY_EPS) | (np.abs(w) < _BARY_EPS)
        inside_ish = (u > -_BARY_EPS) & (v > -_BARY_EPS) & (w > -_BARY_EPS)
        graze = plane_hit & inside_ish & near_edge
        graze |= ~near_par[None, :] & inside_ish & (np.abs(t) <= eps_t)
        if near_par.any():
            # parallel ray: only risky when the point lies in the triangle plane
            nrm = np.cross(e1, e2)
            dist = np.abs(np.einsum("kmj,mj->km", s, nrm)) / np.maximum(
                np.linalg.norm(nrm, axis=1), 1e-300
            )
            graze |= near_par[None, :] & (dist < eps_t)
        return hit.sum(axis=1), graze.any(axis=1)

    # -- nearest surface point ----------------------------------------------

    def nearest_distance(self, points: np.ndarray) -> np.ndarray:
        """Exact min distance from each point to the triangle surface."""
        n = len(points)
        if n == 0:
            return np.zeros(0)
        # upper bound: exact distance to the triangle owning the nearest centroid
        if not hasattr(self, "_centroid_tree"):
            self._centroids = (self.tri_a + self.tri_b + self.tri_c) / 3.0
            self._centroid_tree = cKDTree(self._centroids)
        _, seed = self._centroid_tree.query(points, k=1)
        best = _point_triangle_distance_sq(
            points, self.tri_a[seed], self.tri_b[seed], self.tri_c[seed]
        )
        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            lower = self._aabb_distance_sq(node, points[idx])
            keep = lower < best[idx]
            idx = idx[keep]
            if len(idx) == 0:
                continue
            if self.leaf_count[node] > 0:
                lo = self.leaf_start[node]
                tris = self.order[lo : lo + self.leaf_count[node]]
                k, m = len(idx), len(tris)
                p = np.repeat(points[idx], m, axis=0)
                ta = np.tile(self.tri_a[tris], (k, 1))
                tb = np.tile(self.tri_b[tris], (k, 1))
                tc = np.tile(self.tri_c[tris], (k, 1))
                d2 = _point_triangle_distance_sq(p, ta, tb, tc).reshape(k, m)
                np.minimum.at(best, idx, d2.min(axis=1))
            else:
                stack.append((int(self.node_left[node]), idx))
                stack.append((int(self.node_right[node]), idx))
        return np.sqrt(best)

    def _aabb_distance_sq(self, node: int, pts: np.ndarray) -> np.ndarray:
        lo = np.maximum(self.node_min[node] - pts, 0.0)
        hi = np.maximum(pts - self.node_max[node], 0.0)
        d = lo + hi
        return np.einsum("ij,ij->i", d, d)


def _point_triangle_distance_sq(p, a, b, c) -> np.ndarray:
    """Squared distance from points to triangles, rowwise.

    Exact: minimum of the in-plane projection (when its barycentrics are
    inside) and the three edge-segment distances.
    """
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    ap = p - a
    # plane projection distance (valid only when foot is inside the triangle)
    dist_plane = np.einsum("ij,ij->i", ap, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        foot = p - (dist_plane / np.where(nn == 0.0, 1.0, nn))[:, None] * n
    # barycentric inside test for the foot point
    v0 = ac
    v1 = ab
    v2 = foot - a
    d00 = np.einsum("ij,ij->i", v0, v0)
    d01 = np.einsum("ij,ij->i", v0, v1)
    d11 = np.einsum("ij,ij->i", v1, v1)
    d20 = np.einsum("ij,ij->i", v2, v0)
    d21 = np.einsum("ij,ij->i", v2, v1)
    denom = d00 * d11 - d01 * d01
    with np.errstate(divide="ignore", invalid="ignore"):
        bu = (d11 * d20 - d01 * d21) / denom
        bv = (d00 * d21 - d01 * d20) / denom
    inside = (denom > 0) & (bu >= 0) & (bv >= 0) & (bu + bv <= 1.0)
    dp = foot - p
    plane_sq = np.einsum("ij,ij->i", dp, dp)

    e_ab = _point_segment_distance_sq(p, a, b)
    e_bc = _point_segment_distance_sq(p, b, c)
    e_ca = _point_segment_distance_sq(p, c, a)
    edge_sq = np.minimum(np.minimum(e_ab, e_bc), e_ca)
    return np.where(inside, np.minimum(plane_sq, edge_sq), edge_sq)


def _point_segment_distance_sq(p, a, b) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p - a, ab) / np.where(denom == 0.0, 1.0, denom)
    t = np.clip(t, 0.0, 1.0)
    d = a + t[:, None] * ab - p
    return np.einsum("ij,ij->i", d, d)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def inside(mesh: TriMesh, points) -> np.ndarray | bool:
    """True where a point is strictly inside the closed surface.

    Ray-parity with BVH acceleration; grazing hits fall back to a second
    (and third) fixed ray direction. Behavior within the `GEOM_EPS` band of
    the surface is unspecified.
    """
    mesh.require_watertight("inside()")
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    res = mesh.bvh().ray_parity(as_points(p))
    return bool(res[0]) if single else res


def nearest_surface_distance(mesh: TriMesh, points) -> np.ndarray | float:
    """Exact minimum point-to-triangle distance over all faces (>= 0)."""
    if mesh.is_empty():
        raise EmptyMesh("nearest_surface_distance requires a non-empty mesh")
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    res = mesh.bvh().nearest_distance(as_points(p))
    return float(res[0]) if single else res


def sample_surface(mesh: TriMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-weighted uniform samples on the mesh surface."""
    if mesh.is_empty():
        raise EmptyMesh("cannot sample an empty mesh")
    areas = mesh.face_areas()
    faces = rng.choice(mesh.n_faces, size=n, p=areas / areas.sum())
    tri = mesh.triangles()[faces]
    r1 = np.sqrt(rng.uniform(size=n))
    r2 = rng.uniform(size=n)
    u = 1.0 - r1
    v = r1 * (1.0 - r2)
    w = r1 * r2
    return u[:, None] * tri[:, 0] + v[:, None] * tri[:, 1] + w[:, None] * tri[:, 2]


def sample_points(
    mesh: TriMesh,
    n: int,
    sigma: float,
    bbox_pad: float = 0.1,
    rng_seed: int = 0,
) -> np.ndarray:
    """Sample n query points: half near-surface, half uniform in the padded AABB.

    The near-surface half perturbs area-weighted surface samples with
    zero-mean isotropic Gaussian offsets of scale `sigma`; results are
    clamped into the padded AABB so the bound contract holds. Deterministic
    for a fixed seed.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if mesh.is_empty():
        raise EmptyMesh("cannot sample an empty mesh")
    rng = np.random.default_rng(rng_seed)
    box = mesh.aabb().padded(bbox_pad)
    n_surf = n // 2
    n_unif = n - n_surf
    surf = sample_surface(mesh, n_surf, rng)
    surf = surf + rng.normal(scale=sigma, size=(n_surf, 3))
    surf = np.clip(surf, box.vmin, box.vmax)
    unif = box.sample_uniform(n_unif, rng)
    return np.concatenate([surf, unif], axis=0)


def transform(mesh: TriMesh, rotation, translation, scale: float = 1.0) -> TriMesh:
    """Similarity transform v' = scale * R @ v + t; labels and faces preserved."""
    r = check_rotation(rotation)
    t = as_point(translation, "translation")
    if scale <= 0:
        raise ValueError("scale must be positive")
    v = scale * (mesh.vertices @ r.T) + t
    return TriMesh(v, mesh.faces, vertex_labels=mesh.vertex_labels)
