"""Procedural watertight primitives used as desk-scale stand-ins for scans.

All constructors return consistently wound, closed `TriMesh` instances;
convex solids get their winding fixed programmatically against the
centroid, the torus by construction.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def _fix_convex_winding(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Flip faces of a convex, centroid-star-shaped solid to point outward."""
    center = vertices.mean(axis=0)
    tri = vertices[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    outward = np.einsum("ij,ij->i", n, tri.mean(axis=1) - center) >= 0
    fixed = faces.copy()
    fixed[~outward] = fixed[~outward][:, ::-1]
    return fixed


def make_box(vmin, vmax, label: int | None = None) -> TriMesh:
    """Axis-aligned closed box [vmin, vmax]."""
    vmin = np.asarray(vmin, dtype=np.float64)
    vmax = np.asarray(vmax, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for x in (vmin[0], vmax[0]) for y in (vmin[1], vmax[1]) for z in (vmin[2], vmax[2])]
    )
    # index layout: bit2=x, bit1=y, bit0=z
    quads = [
        (0, 1, 3, 2),  # x = min
        (4, 6, 7, 5),  # x = max
        (0, 4, 5, 1),  # y = min
        (2, 3, 7, 6),  # y = max
        (0, 2, 6, 4),  # z = min
        (1, 5, 7, 3),  # z = max
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    faces = _fix_convex_winding(corners, np.asarray(faces, dtype=np.int64))
    labels = None if label is None else np.full(len(corners), label, dtype=np.int32)
    return TriMesh(corners, faces, vertex_labels=labels)


def make_icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0),
                   label: int | None = None) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    verts_list = [tuple(v) for v in verts]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key in cache:
            return cache[key]
        m = np.asarray(verts_list[i]) + np.asarray(verts_list[j])
        m /= np.linalg.norm(m)
        verts_list.append(tuple(m))
        cache[key] = len(verts_list) - 1
        return cache[key]

    tris = [tuple(f) for f in faces]
    for _ in range(subdivisions):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = nxt
    v = np.asarray(verts_list) * radius + np.asarray(center, dtype=np.float64)
    f = _fix_convex_winding(v, np.asarray(tris, dtype=np.int64))
    labels = None if label is None else np.full(len(v), label, dtype=np.int32)
    return TriMesh(v, f, vertex_labels=labels)


def make_torus(major_radius: float = 1.0, minor_radius: float = 0.3,
               n_major: int = 48, n_minor: int = 24, center=(0.0, 0.0, 0.0),
               label: int | None = None) -> TriMesh:
    """Torus around the z axis (outward winding by construction)."""
    alphas = 2.0 * np.pi * np.arange(n_major) / n_major
    betas = 2.0 * np.pi * np.arange(n_minor) / n_minor
    a, b = np.meshgrid(alphas, betas, indexing="ij")
    ring = major_radius + minor_radius * np.cos(b)
    verts = np.stack(
        [ring * np.cos(a), ring * np.sin(a), minor_radius * np.sin(b)], axis=-1
    ).reshape(-1, 3) + np.asarray(center, dtype=np.float64)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            v00 = i * n_minor + j
            v10 = ((i + 1) % n_major) * n_minor + j
            v01 = i * n_minor + (j + 1) % n_minor
            v11 = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    labels = None if label is None else np.full(len(verts), label, dtype=np.int32)
    return TriMesh(verts, np.asarray(faces, dtype=np.int64), vertex_labels=labels)


def make_capsule(radius: float = 0.1, length: float = 0.6, n_segments: int = 16,
                 n_rings: int = 8, n_length: int = 8, center=(0.0, 0.0, 0.0),
                 label: int | None = None) -> TriMesh:
    """Capsule along the z axis: cylinder of `length` with hemispherical caps.

    This is the skinnable stand-in body for reposing tests; joints placed
    along its axis bend it like a limb.
    """
    half = length / 2.0
    rows: list[tuple[float, float]] = []  # (z, ring_radius)
    for i in range(1, n_rings + 1):  # bottom hemisphere, from near-pole up to seam
        t = (i / n_rings) * (np.pi / 2.0)
        rows.append((-half - radius * np.cos(t), radius * np.sin(t)))
    for i in range(1, n_length):  # cylinder interior rings
        rows.append((-half + length * i / n_length, radius))
    for i in range(n_rings, 0, -1):  # top hemisphere, seam up to near-pole
        t = (i / n_rings) * (np.pi / 2.0)
        rows.append((half + radius * np.cos(t), radius * np.sin(t)))

    verts = [np.array([0.0, 0.0, -half - radius])]
    for z, r in rows:
        ang = 2.0 * np.pi * np.arange(n_segments) / n_segments
        ring = np.stack([r * np.cos(ang), r * np.sin(ang), np.full(n_segments, z)], axis=-1)
        verts.append(ring)
    verts.append(np.array([0.0, 0.0, half + radius]))
    vertices = np.concatenate([v.reshape(-1, 3) for v in verts], axis=0)

    faces = []
    # bottom fan
    first_ring = 1
    for s in range(n_segments):
        faces.append((0, first_ring + s, first_ring + (s + 1) % n_segments))
    # ring strips
    n_rows = len(rows)
    for r in range(n_rows - 1):
        a0 = 1 + r * n_segments
        b0 = 1 + (r + 1) * n_segments
        for s in range(n_segments):
            s1 = (s + 1) % n_segments
            faces.append((a0 + s, b0 + s, b0 + s1))
            faces.append((a0 + s, b0 + s1, a0 + s1))
    # top fan
    top = len(vertices) - 1
    last_ring = 1 + (n_rows - 1) * n_segments
    for s in range(n_segments):
        faces.append((top, last_ring + (s + 1) % n_segments, last_ring + s))

    vertices = vertices + np.asarray(center, dtype=np.float64)
    f = _fix_convex_winding(vertices, np.asarray(faces, dtype=np.int64))
    labels = None if label is None else np.full(len(vertices), label, dtype=np.int32)
    return TriMesh(vertices, f, vertex_labels=labels)


def merge(meshes: list[TriMesh]) -> TriMesh:
    """Concatenate meshes into one (labels kept when every input has them)."""
    verts = []
    faces = []
    labels = []
    offset = 0
    all_labeled = all(m.vertex_labels is not None for m in meshes)
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        if all_labeled:
            labels.append(m.vertex_labels)
        offset += m.n_vertices
    return TriMesh(
        np.concatenate(verts),
        np.concatenate(faces),
        vertex_labels=np.concatenate(labels) if all_labeled else None,
    )
