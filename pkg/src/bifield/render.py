"""Software rasterization: z-buffered depth, instance-label and shaded
intensity images, plus raw-array map I/O.

Depth maps store the Euclidean distance from the camera center to the
nearest surface point on each pixel ray (not camera-space z), so the
depth-matching test used by label fusion compares like with like. A single
map is written by one worker only; rendering different views can run
concurrently.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .cameras import Camera
from .errors import MissingLabels
from .mesh import TriMesh

BACKGROUND_LABEL = -1


@dataclass
class DepthMap:
    """Per-pixel camera distance; +inf where no surface is hit."""

    depth: np.ndarray  # (h, w) float64

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


@dataclass
class LabelMap:
    """Per-pixel instance id in {0, 1}; BACKGROUND_LABEL where empty."""

    labels: np.ndarray  # (h, w) int32

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def _rasterize(cam: Camera, mesh: TriMesh):
    """Core z-buffer pass: returns (euclidean distance, face id) buffers.

    Perspective-correct interpolation of the camera-space position gives the
    exact per-pixel surface point, from which the Euclidean distance follows.
    Faces with any vertex at non-positive depth are skipped (desk-scale rigs
    keep subjects fully in front of every camera).
    """
    h, w = cam.height, cam.width
    dist = np.full((h, w), np.inf)
    zbuf = np.full((h, w), np.inf)
    fid = np.full((h, w), -1, dtype=np.int32)
    if mesh.is_empty():
        return dist, fid

    vc = mesh.vertices @ cam.R.T + cam.t  # camera space
    z = vc[:, 2]
    hcoords = vc @ cam.K.T
    with np.errstate(divide="ignore", invalid="ignore"):
        pix = hcoords[:, :2] / z[:, None]

    for i, f in enumerate(mesh.faces):
        zf = z[f]
        if np.any(zf <= 1e-9):
            continue
        p = pix[f]  # (3, 2) screen coords
        x0 = max(int(np.ceil(p[:, 0].min())), 0)
        x1 = min(int(np.floor(p[:, 0].max())), w - 1)
        y0 = max(int(np.ceil(p[:, 1].min())), 0)
        y1 = min(int(np.floor(p[:, 1].max())), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        area = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[2, 0] - p[0, 0]) * (p[1, 1] - p[0, 1])
        if area == 0.0:
            continue
        gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
        l0 = (p[1, 0] - gx) * (p[2, 1] - gy) - (p[2, 0] - gx) * (p[1, 1] - gy)
        l1 = (p[2, 0] - gx) * (p[0, 1] - gy) - (p[0, 0] - gx) * (p[2, 1] - gy)
        l2 = area - l0 - l1
        if area < 0:
            l0, l1, l2, a = -l0, -l1, -l2, -area
        else:
            a = area
        cover = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not cover.any():
            continue
        l0, l1, l2 = l0[cover] / a, l1[cover] / a, l2[cover] / a
        inv_z = l0 / zf[0] + l1 / zf[1] + l2 / zf[2]
        zpix = 1.0 / inv_z
        pcam = (
            l0[:, None] * (vc[f[0]] / zf[0])
            + l1[:, None] * (vc[f[1]] / zf[1])
            + l2[:, None] * (vc[f[2]] / zf[2])
        ) * zpix[:, None]
        dpix = np.linalg.norm(pcam, axis=1)
        yy, xx = gy[cover], gx[cover]
        closer = zpix < zbuf[yy, xx]
        yy, xx = yy[closer], xx[closer]
        zbuf[yy, xx] = zpix[closer]
        dist[yy, xx] = dpix[closer]
        fid[yy, xx] = i
    return dist, fid


def render_depth(cam: Camera, mesh: TriMesh) -> DepthMap:
    """Z-buffered depth render; empty pixels hold +inf."""
    dist, _ = _rasterize(cam, mesh)
    return DepthMap(depth=dist)


def render_labels(cam: Camera, mesh: TriMesh) -> LabelMap:
    """Instance id of the front-most face per pixel (face label = vertex majority)."""
    if mesh.vertex_labels is None:
        raise MissingLabels("render_labels requires a labeled mesh")
    _, fid = _rasterize(cam, mesh)
    face_labels = mesh.face_labels()
    out = np.full(fid.shape, BACKGROUND_LABEL, dtype=np.int32)
    hit = fid >= 0
    out[hit] = face_labels[fid[hit]]
    return LabelMap(labels=out)


def render_view(cam: Camera, mesh: TriMesh):
    """One rasterization pass returning (DepthMap, LabelMap or None, intensity).

    The intensity image is a flat-shaded facing-ratio render in [0, 1]
    (background 0); it is the fixed stand-in for photographic input that
    feeds the feature pyramid.
    """
    dist, fid = _rasterize(cam, mesh)
    hit = fid >= 0
    intensity = np.zeros(dist.shape)
    if hit.any():
        normals = mesh.face_normals()
        centroids = mesh.triangles().mean(axis=1)
        views = centroids - cam.center
        views /= np.linalg.norm(views, axis=1, keepdims=True)
        facing = np.abs(np.einsum("ij,ij->i", normals, views))
        intensity[hit] = facing[fid[hit]]
    labels = None
    if mesh.vertex_labels is not None:
        lab = np.full(fid.shape, BACKGROUND_LABEL, dtype=np.int32)
        lab[hit] = mesh.face_labels()[fid[hit]]
        labels = LabelMap(labels=lab)
    return DepthMap(depth=dist), labels, intensity


# ---------------------------------------------------------------------------
# Raw-array map I/O: <name>.bin plus a sidecar <name>.txt header
# ---------------------------------------------------------------------------

_MAP_DTYPES = {"float32": "<f4", "int32": "<i4", "float64": "<f8"}


def save_map(path_base: str | os.PathLike, array: np.ndarray, dtype: str):
    if dtype not in _MAP_DTYPES:
        raise ValueError(f"unsupported map dtype {dtype}")
    data = np.ascontiguousarray(array.astype(_MAP_DTYPES[dtype]))
    with open(f"{path_base}.bin", "wb") as fh:
        fh.write(data.tobytes())
    with open(f"{path_base}.txt", "w", encoding="utf-8") as fh:
        fh.write("bifield-map 1\n")
        fh.write(f"dtype {dtype}\n")
        fh.write("shape " + " ".join(str(s) for s in array.shape) + "\n")
        fh.write("order row-major\n")


def load_map(path_base: str | os.PathLike) -> np.ndarray:
    with open(f"{path_base}.txt", "r", encoding="utf-8") as fh:
        lines = dict(
            (p[0], p[1:]) for p in (ln.split() for ln in fh if ln.strip())
        )
    dtype = lines["dtype"][0]
    shape = tuple(int(s) for s in lines["shape"])
    with open(f"{path_base}.bin", "rb") as fh:
        data = np.frombuffer(fh.read(), dtype=_MAP_DTYPES[dtype])
    return data.reshape(shape).copy()


def save_depth_map(path_base, dmap: DepthMap):
    save_map(path_base, dmap.depth, "float32")


def load_depth_map(path_base) -> DepthMap:
    return DepthMap(depth=load_map(path_base).astype(np.float64))


def save_label_map(path_base, lmap: LabelMap):
    save_map(path_base, lmap.labels, "int32")


def load_label_map(path_base) -> LabelMap:
    return LabelMap(labels=load_map(path_base).astype(np.int32))
