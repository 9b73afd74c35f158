"""Iso-surface extraction with the classic 256-case marching-cubes table.

The per-configuration triangle table is derived once at import: contours on
each cube face connect crossed edges (the ambiguous four-crossing case is
resolved by always cutting off the inside corners, which neighboring cells
resolve identically, so the output stays crack-free), the contour cycles
are fan-triangulated, and each cycle is oriented so normals point from the
inside region (value > iso) toward the outside. Vertices are deduplicated
on global grid-edge keys, which makes the output watertight whenever the
field crosses the iso level strictly inside the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Aabb, TriMesh

# -- cube topology ----------------------------------------------------------

# corner index = x + 2y + 4z
_CORNER_OFFSETS = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)], dtype=np.int64)

_EDGE_ORIGINS = {
    0: [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)],  # x edges
    1: [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1)],  # y edges
    2: [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)],  # z edges
}

_EDGES = []  # edge id -> (axis, origin offset, corner a, corner b)
for _axis in range(3):
    for _o in _EDGE_ORIGINS[_axis]:
        _a = _o[0] + 2 * _o[1] + 4 * _o[2]
        _unit = [0, 0, 0]
        _unit[_axis] = 1
        _b = (_o[0] + _unit[0]) + 2 * (_o[1] + _unit[1]) + 4 * (_o[2] + _unit[2])
        _EDGES.append((_axis, np.array(_o, dtype=np.int64), _a, _b))

_EDGE_BY_CORNERS = {}
for _eid, (_, _, _a, _b) in enumerate(_EDGES):
    _EDGE_BY_CORNERS[(_a, _b)] = _eid
    _EDGE_BY_CORNERS[(_b, _a)] = _eid

_FACES = [
    (0, 2, 6, 4),  # x = 0
    (1, 3, 7, 5),  # x = 1
    (0, 1, 5, 4),  # y = 0
    (2, 3, 7, 6),  # y = 1
    (0, 1, 3, 2),  # z = 0
    (4, 5, 7, 6),  # z = 1
]


def _build_table() -> list[np.ndarray]:
    """Triangles (as edge-id triples) for each of the 256 corner configurations."""
    mids = np.array(
        [(_CORNER_OFFSETS[a] + _CORNER_OFFSETS[b]) / 2.0 for _, _, a, b in _EDGES]
    )
    table = []
    for config in range(256):
        ins = [(config >> c) & 1 == 1 for c in range(8)]
        links: dict[int, list[int]] = {}

        def link(e1: int, e2: int):
            links.setdefault(e1, []).append(e2)
            links.setdefault(e2, []).append(e1)

        for corners in _FACES:
            cins = [ins[c] for c in corners]
            eids = [_EDGE_BY_CORNERS[(corners[i], corners[(i + 1) % 4])] for i in range(4)]
            crossed = [i for i in range(4) if cins[i] != cins[(i + 1) % 4]]
            if len(crossed) == 2:
                link(eids[crossed[0]], eids[crossed[1]])
            elif len(crossed) == 4:
                # ambiguous face: cut off each (isolated) inside corner
                for p in range(4):
                    if cins[p] and not cins[(p + 1) % 4] and not cins[(p - 1) % 4]:
                        link(eids[(p - 1) % 4], eids[p])
        # walk cycles
        tris = []
        visited = set()
        for start in sorted(links):
            if start in visited:
                continue
            cycle = [start]
            visited.add(start)
            prev, cur = None, start
            while True:
                step = None
                for cand in links[cur]:
                    if cand == prev:
                        continue
                    step = cand
                    break
                if step is None or step == cycle[0]:
                    break
                cycle.append(step)
                visited.add(step)
                prev, cur = cur, step
            if len(cycle) < 3:
                continue
            # orient: normal should point from inside corners toward outside
            pts = mids[cycle]
            normal = np.zeros(3)
            for i in range(len(pts)):
                a, b = pts[i], pts[(i + 1) % len(pts)]
                normal += np.cross(a, b)
            in_c = np.array([_CORNER_OFFSETS[_EDGES[e][2 if ins[_EDGES[e][2]] else 3]] for e in cycle])
            out_c = np.array([_CORNER_OFFSETS[_EDGES[e][3 if ins[_EDGES[e][2]] else 2]] for e in cycle])
            g = out_c.mean(axis=0) - in_c.mean(axis=0)
            if np.dot(normal, g) < 0:
                cycle = cycle[::-1]
            for i in range(1, len(cycle) - 1):
                tris.append((cycle[0], cycle[i], cycle[i + 1]))
        table.append(np.asarray(tris, dtype=np.int64).reshape(-1, 3))
    return table


_TRI_TABLE = _build_table()


# -- grid container -----------------------------------------------------------


@dataclass
class ScalarGrid:
    """Scalar samples at the corners of a regular grid spanning `box`."""

    values: np.ndarray  # (nx, ny, nz) float64
    box: Aabb

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or min(self.values.shape) < 2:
            raise ValueError("grid needs >= 2 corner samples per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.values.shape

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        nx, ny, nz = self.values.shape
        return (
            np.linspace(self.box.vmin[0], self.box.vmax[0], nx),
            np.linspace(self.box.vmin[1], self.box.vmax[1], ny),
            np.linspace(self.box.vmin[2], self.box.vmax[2], nz),
        )


def sample_grid(fn, box: Aabb, resolution, batch: int = 262144) -> ScalarGrid:
    """Evaluate `fn(points (n,3)) -> (n,)` on the grid corners, batched."""
    res = tuple(int(r) for r in (resolution if np.iterable(resolution) else (resolution,) * 3))
    ax = [np.linspace(box.vmin[i], box.vmax[i], res[i]) for i in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), batch):
        hi = min(lo + batch, len(pts))
        out[lo:hi] = fn(pts[lo:hi])
    return ScalarGrid(values=out.reshape(res), box=box)


# -- marching cubes -----------------------------------------------------------


def marching_cubes(grid: ScalarGrid, iso: float = 0.5) -> TriMesh:
    """Extract the iso-surface as a triangle mesh (empty when no crossing).

    Linear interpolation along crossed edges; shared vertices are merged on
    grid-edge identity, triangles wind outward (away from values > iso).
    """
    values = grid.values
    nx, ny, nz = values.shape
    ins = values > iso

    config = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for c in range(8):
        ox, oy, oz = _CORNER_OFFSETS[c]
        config |= (
            ins[ox : ox + nx - 1, oy : oy + ny - 1, oz : oz + nz - 1].astype(np.int64) << c
        )

    mixed = (config != 0) & (config != 255)
    if not mixed.any():
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    cells = np.argwhere(mixed)
    cfgs = config[mixed]
    key_stride = nx * ny * nz
    face_keys = []
    for c in np.unique(cfgs):
        tri_edges = _TRI_TABLE[c]
        if len(tri_edges) == 0:
            continue
        cell_c = cells[cfgs == c]  # (k, 3)
        k, t = len(cell_c), len(tri_edges)
        # global edge key = axis * stride + flat index of the edge origin corner
        keys = np.empty((k, t, 3), dtype=np.int64)
        for ti in range(t):
            for vi in range(3):
                axis, off, _, _ = _EDGES[tri_edges[ti, vi]]
                origin = cell_c + off
                flat = (origin[:, 0] * ny + origin[:, 1]) * nz + origin[:, 2]
                keys[:, ti, vi] = axis * key_stride + flat
        face_keys.append(keys.reshape(-1, 3))
    all_faces = np.concatenate(face_keys, axis=0)
    uniq, inverse = np.unique(all_faces.ravel(), return_inverse=True)
    faces = inverse.reshape(-1, 3).astype(np.int64)

    # interpolate one vertex per unique global edge
    axis = uniq // key_stride
    flat = uniq % key_stride
    ox = flat // (ny * nz)
    oy = (flat // nz) % ny
    oz = flat % nz
    ax_x, ax_y, ax_z = grid.axes()
    p0 = np.stack([ax_x[ox], ax_y[oy], ax_z[oz]], axis=1)
    ex = (axis == 0).astype(np.int64)
    ey = (axis == 1).astype(np.int64)
    ez = (axis == 2).astype(np.int64)
    v0 = values[ox, oy, oz]
    v1 = values[ox + ex, oy + ey, oz + ez]
    p1 = np.stack([ax_x[ox + ex], ax_y[oy + ey], ax_z[oz + ez]], axis=1)
    denom = v1 - v0
    t = (iso - v0) / np.where(denom == 0.0, 1.0, denom)
    verts = p0 + t[:, None] * (p1 - p0)
    # keep sliver faces (t ~ 0): dropping them would puncture the surface
    return TriMesh(verts, faces, area_eps=0.0)
