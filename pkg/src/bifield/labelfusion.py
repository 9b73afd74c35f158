"""Virtual multi-view fusion of 2D semantic labels onto mesh vertices.

Each vertex is projected into every view; views whose rendered depth agrees
with the vertex's camera distance within delta count as evidence, and the
modal 2D label wins. Vertices with no evidence stay unlabeled. Per-vertex
work is independent and shares read-only views.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cameras import Camera, project_points
from .errors import EmptyMesh, RigMismatch
from .mesh import TriMesh
from .render import BACKGROUND_LABEL, DepthMap, LabelMap

UNLABELED = -1


class TieBreak(Enum):
    LOWEST_LABEL = "lowest_label"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class FusionConfig:
    """delta defaults to 1% of the scene AABB diagonal when left None."""

    n_views: int = 64
    delta: float | None = None
    tie_break: TieBreak = TieBreak.LOWEST_LABEL

    def __post_init__(self):
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.n_views < 1:
            raise ValueError("n_views must be >= 1")


def resolve_delta(mesh: TriMesh, cfg: FusionConfig) -> float:
    return cfg.delta if cfg.delta is not None else 0.01 * mesh.aabb().diagonal


def _evidence(mesh: TriMesh, cam: Camera, depth: DepthMap, delta: float):
    """(vertex indices with depth-matched projections, their pixel indices)."""
    pix, dist, front = project_points(cam, mesh.vertices)
    ij = np.round(pix).astype(np.int64)
    ok = (
        front
        & (ij[:, 0] >= 0)
        & (ij[:, 0] < depth.width)
        & (ij[:, 1] >= 0)
        & (ij[:, 1] < depth.height)
    )
    idx = np.where(ok)[0]
    d = depth.depth[ij[idx, 1], ij[idx, 0]]
    matched = np.abs(d - dist[idx]) < delta
    return idx[matched], ij[idx[matched]]


def visibility_mask(mesh: TriMesh, cam: Camera, depth: DepthMap, delta: float) -> np.ndarray:
    """True where a vertex projects inside the image with matching depth."""
    if mesh.n_vertices == 0:
        raise EmptyMesh("visibility_mask requires a non-empty mesh")
    out = np.zeros(mesh.n_vertices, dtype=bool)
    idx, _ = _evidence(mesh, cam, depth, delta)
    out[idx] = True
    return out


def label_vertices(
    mesh: TriMesh,
    cams: list[Camera],
    depths: list[DepthMap],
    labels2d: list[LabelMap],
    cfg: FusionConfig = FusionConfig(),
    return_confidence: bool = False,
):
    """Modal depth-matched 2D label per vertex; UNLABELED without evidence.

    Ties resolve per `cfg.tie_break`. With `return_confidence` the modal
    fraction of the evidence multiset is returned alongside the labels.
    """
    if mesh.n_vertices == 0:
        raise EmptyMesh("label_vertices requires a non-empty mesh")
    if not (len(cams) == len(depths) == len(labels2d)):
        raise RigMismatch("cameras, depth maps and label maps must align")
    delta = resolve_delta(mesh, cfg)
    votes = np.zeros((mesh.n_vertices, 2), dtype=np.int64)
    for cam, dmap, lmap in zip(cams, depths, labels2d):
        idx, ij = _evidence(mesh, cam, dmap, delta)
        lab = lmap.labels[ij[:, 1], ij[:, 0]]
        for value in (0, 1):
            np.add.at(votes[:, value], idx[lab == value], 1)
        # BACKGROUND_LABEL pixels contribute no evidence even if depth matches
    total = votes.sum(axis=1)
    out = np.full(mesh.n_vertices, UNLABELED, dtype=np.int32)
    has = total > 0
    lead = votes[:, 1] - votes[:, 0]
    out[has & (lead > 0)] = 1
    out[has & (lead < 0)] = 0
    tied = has & (lead == 0)
    if cfg.tie_break is TieBreak.LOWEST_LABEL:
        out[tied] = 0
    # TieBreak.UNLABELED leaves ties at UNLABELED
    if not return_confidence:
        return out
    conf = np.zeros(mesh.n_vertices)
    conf[has] = votes[has].max(axis=1) / total[has]
    return out, conf


def fuse_rendered_views(mesh: TriMesh, cams: list[Camera], cfg: FusionConfig = FusionConfig(),
                        return_confidence: bool = False):
    """Test-harness shortcut: render depths+labels from the mesh's own labels
    and run the fusion on them (used where the upstream 2D segmentation is
    simulated rather than supplied)."""
    from .render import render_view

    depths, labels = [], []
    for cam in cams:
        dmap, lmap, _ = render_view(cam, mesh)
        depths.append(dmap)
        labels.append(lmap)
    return label_vertices(mesh, cams, depths, labels, cfg, return_confidence=return_confidence)
