"""Perspective cameras and multi-view rig generation.

Conventions: world-to-camera transform X_cam = R @ X + t, camera looks
along +z_cam, pixel = perspective division of K @ X_cam. Pixel centers sit
on integer coordinates, so the default principal point is ((w-1)/2, (h-1)/2).
The reported camera distance is the Euclidean distance from the camera
center to the point, which matches what the depth renderer stores.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera
from .validation import as_point, as_points, check_rotation


@dataclass(frozen=True)
class KSpec:
    """Pinhole intrinsics recipe used by the rig generators."""

    width: int = 512
    height: int = 512
    focal_px: float | None = None  # defaults to 0.8 * width

    def matrix(self) -> np.ndarray:
        f = self.focal_px if self.focal_px is not None else 0.8 * self.width
        return np.array(
            [
                [f, 0.0, (self.width - 1) / 2.0],
                [0.0, f, (self.height - 1) / 2.0],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class Camera:
    """Perspective camera: intrinsics K, world-to-camera rotation R, translation t."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.K, dtype=np.float64)
        if K.shape != (3, 3) or K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0:
            raise ValueError("K must be 3x3 upper-triangular")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("K must have positive focal entries")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", check_rotation(self.R))
        object.__setattr__(self, "t", as_point(self.t, "t"))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.R.T @ self.t

    @property
    def forward(self) -> np.ndarray:
        """Unit viewing axis in world coordinates (+z row of R)."""
        return self.R[2]

    def to_camera(self, points) -> np.ndarray:
        return as_points(points) @ self.R.T + self.t


def project(cam: Camera, point) -> tuple[np.ndarray, float]:
    """Project one world point: returns (pixel, camera distance).

    pixel = perspective division of K (R X + t); the distance is
    ||X + R^-1 t||_2, i.e. the Euclidean distance from the camera center.
    Raises BehindCamera when the camera-space depth is not positive.
    """
    X = as_point(point)
    xc = cam.R @ X + cam.t
    if xc[2] <= 0.0:
        raise BehindCamera("point has non-positive camera-space depth")
    h = cam.K @ xc
    pixel = h[:2] / h[2]
    return pixel, float(np.linalg.norm(xc))


def project_points(cam: Camera, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection: (pixels (n,2), camera distances (n,), in-front mask).

    Pixels for behind-camera points are unusable; callers must honour the mask.
    """
    xc = cam.to_camera(points)
    z = xc[:, 2]
    in_front = z > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = xc @ cam.K.T
        pix = h[:, :2] / np.where(z == 0.0, 1.0, z)[:, None]
    dist = np.linalg.norm(xc, axis=1)
    return pix, dist, in_front


def view_directions(cam: Camera, points) -> np.ndarray:
    """Unit world-space directions from the camera center to each point."""
    d = as_points(points) - cam.center
    n = np.linalg.norm(d, axis=1, keepdims=True)
    return d / np.where(n == 0.0, 1.0, n)


def look_at(position, target, kspec: KSpec, up=(0.0, 0.0, 1.0)) -> Camera:
    """Camera at `position` with its optical axis through `target`."""
    position = as_point(position)
    target = as_point(target)
    z = target - position
    zn = np.linalg.norm(z)
    if zn == 0.0:
        raise ValueError("camera position coincides with look-at target")
    z = z / zn
    up = as_point(up)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-12:  # looking along the up axis
        x = np.cross(z, np.array([1.0, 0.0, 0.0]))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    r = np.stack([x, y, z])
    # renormalize rows for an exactly orthonormal matrix
    r[1] /= np.linalg.norm(r[1])
    return Camera(K=kspec.matrix(), R=r, t=-r @ position, width=kspec.width, height=kspec.height)


def rig_circle(
    n_views: int,
    radius: float,
    height: float = 0.0,
    lookat=(0.0, 0.0, 0.0),
    kspec: KSpec = KSpec(),
) -> list[Camera]:
    """Cameras equally spaced in azimuth on a horizontal circle, all aimed at `lookat`."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    lookat = as_point(lookat)
    cams = []
    for i in range(n_views):
        a = 2.0 * np.pi * i / n_views
        pos = lookat + np.array([radius * np.cos(a), radius * np.sin(a), height])
        cams.append(look_at(pos, lookat, kspec))
    return cams


def rig_sphere(
    n_views: int,
    radius: float,
    lookat=(0.0, 0.0, 0.0),
    kspec: KSpec = KSpec(),
) -> list[Camera]:
    """Cameras on a Fibonacci lattice over the full sphere, aimed at `lookat`.

    The lattice is deterministic and near-uniform; minimum pairwise angular
    separation stays above half the ideal spacing.
    """
    if n_views < 4:
        raise ValueError("n_views must be >= 4")
    lookat = as_point(lookat)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    cams = []
    for i in range(n_views):
        z = 1.0 - 2.0 * (i + 0.5) / n_views
        rho = np.sqrt(max(0.0, 1.0 - z * z))
        a = golden * i
        pos = lookat + radius * np.array([rho * np.cos(a), rho * np.sin(a), z])
        cams.append(look_at(pos, lookat, kspec))
    return cams


# ---------------------------------------------------------------------------
# Rig serialization (structured text)
# ---------------------------------------------------------------------------


def save_rig(path: str | os.PathLike, cams: list[Camera]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bifield-rig 1\n")
        fh.write(f"cameras {len(cams)}\n")
        for i, c in enumerate(cams):
            fh.write(f"camera {i}\n")
            fh.write(f"size {c.width} {c.height}\n")
            fh.write("K " + " ".join(f"{x:.17g}" for x in c.K.ravel()) + "\n")
            fh.write("R " + " ".join(f"{x:.17g}" for x in c.R.ravel()) + "\n")
            fh.write("t " + " ".join(f"{x:.17g}" for x in c.t) + "\n")


def load_rig(path: str | os.PathLike) -> list[Camera]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if lines[0][0] != "bifield-rig":
        raise ValueError(f"{path}: not a rig file")
    n = int(lines[1][1])
    cams = []
    i = 2
    for _ in range(n):
        assert lines[i][0] == "camera"
        w, h = int(lines[i + 1][1]), int(lines[i + 1][2])
        K = np.array([float(x) for x in lines[i + 2][1:]]).reshape(3, 3)
        R = np.array([float(x) for x in lines[i + 3][1:]]).reshape(3, 3)
        t = np.array([float(x) for x in lines[i + 4][1:]])
        cams.append(Camera(K=K, R=R, t=t, width=w, height=h))
        i += 5
    return cams
