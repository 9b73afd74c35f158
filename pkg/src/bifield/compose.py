"""Synthetic scene composition.

Places an object against a human/hand mesh with randomized similarity
transforms drawn from configured ranges, intentionally allowing (or
rejecting) interpenetration, and emits instance-labeled sample sets where
penetration points carry 1 in BOTH channels. Scenes are deterministic
functions of their seed; composition jobs across seeds are independent.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import NonWatertight
from .mesh import Aabb, SampleSet, SampleSource, TriMesh, inside, sample_surface, transform
from .validation import as_point

UP_AXIS = 2  # +z is vertical throughout the package


@dataclass(frozen=True)
class PlacementSpec:
    """Randomized placement ranges for the object mesh.

    Rotation is about `rotation_axis` with an angle drawn from
    `rotation_range` (radians). `max_overlap` caps the Monte-Carlo overlap
    estimate (fraction of the object volume) when penetration is allowed;
    placements violating the constraints are redrawn, up to `max_retries`.
    """

    translation_range: tuple = ((-0.1, 0.1), (-0.1, 0.1), (-0.1, 0.1))
    rotation_axis: tuple = (0.0, 0.0, 1.0)
    rotation_range: tuple = (-np.pi, np.pi)
    scale_range: tuple = (0.9, 1.1)
    allow_penetration: bool = True
    max_overlap: float | None = None
    rng_seed: int = 0
    max_retries: int = 100

    def __post_init__(self):
        if self.scale_range[0] <= 0:
            raise ValueError("scale interval must be positive")


@dataclass
class ComposedScene:
    """Two placed meshes plus the transform that produced the object placement."""

    human: TriMesh
    object: TriMesh
    rotation: np.ndarray
    translation: np.ndarray
    scale: float
    seed: int

    def union_mesh(self) -> TriMesh:
        from .primitives import merge

        h = self.human.with_labels(np.zeros(self.human.n_vertices, dtype=np.int32))
        o = self.object.with_labels(np.ones(self.object.n_vertices, dtype=np.int32))
        return merge([h, o])


def _axis_angle_matrix(axis, angle: float) -> np.ndarray:
    a = as_point(axis)
    a = a / np.linalg.norm(a)
    kx, ky, kz = a
    k = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def overlap_fraction(a: TriMesh, b: TriMesh, n: int = 4096, seed: int = 0) -> float:
    """Monte-Carlo estimate of vol(a ∩ b) / vol(b) via containment tests."""
    box_a = a.aabb()
    box_b = b.aabb()
    lo = np.maximum(box_a.vmin, box_b.vmin)
    hi = np.minimum(box_a.vmax, box_b.vmax)
    if np.any(lo >= hi):
        return 0.0
    rng = np.random.default_rng(seed)
    inter_box = Aabb(lo, hi)
    pts = inter_box.sample_uniform(n, rng)
    both = inside(a, pts) & inside(b, pts)
    vol_b = abs(b.signed_volume())
    if vol_b == 0.0:
        return 0.0
    return float(both.mean() * inter_box.volume / vol_b)


def scene_sample_points(
    human: TriMesh, obj: TriMesh, n: int, sigma: float, bbox_pad: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Query-point mixture for a two-mesh scene.

    Keeps the global 50/50 near-surface/uniform split: a quarter of the
    points hug each surface (Gaussian scale `sigma`), the rest fill the
    joint padded AABB.
    """
    box = human.aabb().union(obj.aabb()).padded(bbox_pad)
    n_h = n // 4
    n_o = n // 4
    n_u = n - n_h - n_o
    p_h = sample_surface(human, n_h, rng) + rng.normal(scale=sigma, size=(n_h, 3))
    p_o = sample_surface(obj, n_o, rng) + rng.normal(scale=sigma, size=(n_o, 3))
    p_u = box.sample_uniform(n_u, rng)
    pts = np.concatenate([p_h, p_o, p_u], axis=0)
    return np.clip(pts, box.vmin, box.vmax)


def pair_samples(
    human: TriMesh,
    obj: TriMesh,
    n: int,
    source: SampleSource,
    sigma: float | None = None,
    bbox_pad: float = 0.1,
    rng_seed: int = 0,
) -> SampleSet:
    """Sample and label query points for a placed pair, per supervision kind.

    SYNTHETIC_INSTANCE carries both channels (penetration points get 1 in
    both), SYNTHETIC_OBJECT_ONLY just the object channel, REAL_UNION only
    the OR of the two containment tests.
    """
    rng = np.random.default_rng(rng_seed)
    if sigma is None:
        sigma = 0.05 * human.aabb().union(obj.aabb()).diagonal
    pts = scene_sample_points(human, obj, n, sigma, bbox_pad, rng)
    if source is SampleSource.REAL_UNION:
        occ_u = (inside(human, pts) | inside(obj, pts)).astype(np.uint8)
        return SampleSet(points=pts, source=source, occ_union=occ_u)
    occ_o = inside(obj, pts).astype(np.uint8)
    if source is SampleSource.SYNTHETIC_OBJECT_ONLY:
        return SampleSet(points=pts, source=source, occ_object=occ_o)
    occ_h = inside(human, pts).astype(np.uint8)
    return SampleSet(
        points=pts, source=source, occ_human=occ_h, occ_object=occ_o,
        occ_union=np.maximum(occ_h, occ_o),
    )


def compose_scene(
    human: TriMesh,
    obj: TriMesh,
    spec: PlacementSpec,
    n_samples: int = 6000,
    sigma: float | None = None,
    bbox_pad: float = 0.1,
) -> tuple[ComposedScene, SampleSet]:
    """Place the object by a sampled similarity transform and label samples.

    Instance occupancy requires watertight inputs; points inside both
    placed meshes get 1 in both channels (the penetration assignment rule)
    and the union channel is their pointwise max. A non-watertight human
    (e.g. a reposed scan) downgrades the set to object-only supervision.
    """
    object_only = not human.is_watertight()
    if not obj.is_watertight():
        raise NonWatertight("object mesh must be watertight to generate occupancy")
    rng = np.random.default_rng(spec.rng_seed)
    placed = None
    for _ in range(spec.max_retries):
        t = np.array([rng.uniform(lo, hi) for lo, hi in spec.translation_range])
        ang = rng.uniform(*spec.rotation_range)
        s = rng.uniform(*spec.scale_range)
        r = _axis_angle_matrix(spec.rotation_axis, ang)
        candidate = transform(obj, r, t, s)
        if not spec.allow_penetration or spec.max_overlap is not None:
            limit = 0.0 if not spec.allow_penetration else spec.max_overlap
            frac = overlap_fraction(human, candidate, seed=spec.rng_seed) if not object_only else 0.0
            if frac > limit:
                continue
        placed = (candidate, r, t, s)
        break
    if placed is None:
        raise RuntimeError("no placement satisfied the penetration constraint")
    obj_placed, r, t, s = placed
    scene = ComposedScene(
        human=human, object=obj_placed, rotation=r, translation=t, scale=float(s),
        seed=spec.rng_seed,
    )
    source = (
        SampleSource.SYNTHETIC_OBJECT_ONLY if object_only else SampleSource.SYNTHETIC_INSTANCE
    )
    samples = pair_samples(
        human, obj_placed, n_samples, source, sigma=sigma, bbox_pad=bbox_pad,
        rng_seed=spec.rng_seed + 1,
    )
    return scene, samples


def real_union_samples(
    human: TriMesh, obj: TriMesh, n: int, sigma: float | None = None,
    bbox_pad: float = 0.1, rng_seed: int = 0,
) -> SampleSet:
    """Union-only supervision mimicking a real scan of the composed pair.

    Instance channels are discarded: occupancy is the OR of per-mesh
    containment, exactly what a single merged scan surface would yield.
    """
    return pair_samples(
        human, obj, n, SampleSource.REAL_UNION, sigma=sigma, bbox_pad=bbox_pad,
        rng_seed=rng_seed,
    )


def seat_height_align(
    hip_vertex_index: int, human: TriMesh, chair: TriMesh,
    n_samples: int = 20000, rng_seed: int = 0,
) -> np.ndarray:
    """Vertical-only translation aligning the chair seat with the hip height.

    The seat plane is the 75th height percentile of chair-interior
    occupancy (Monte-Carlo over the chair AABB); the hip height comes from
    the posed human mesh vertex at `hip_vertex_index`.
    """
    if not 0 <= hip_vertex_index < human.n_vertices:
        raise IndexError("hip vertex index out of range")
    hip_h = human.vertices[hip_vertex_index, UP_AXIS]
    rng = np.random.default_rng(rng_seed)
    pts = chair.aabb().sample_uniform(n_samples, rng)
    interior = pts[inside(chair, pts)]
    if len(interior) == 0:
        seat_h = chair.aabb().vmax[UP_AXIS]
    else:
        seat_h = float(np.percentile(interior[:, UP_AXIS], 75.0))
    out = np.zeros(3)
    out[UP_AXIS] = hip_h - seat_h
    return out


# ---------------------------------------------------------------------------
# Scene manifest + SampleSet serialization
# ---------------------------------------------------------------------------

_CHANNELS = ("occ_human", "occ_object", "occ_union")


def save_samples(path_base: str | os.PathLike, samples: SampleSet):
    """Raw little-endian arrays (points float64 nx3, channels uint8 n) with a
    sidecar text header."""
    chunks = [np.ascontiguousarray(samples.points, dtype="<f8").tobytes()]
    present = []
    for name in _CHANNELS:
        v = getattr(samples, name)
        if v is not None:
            chunks.append(np.ascontiguousarray(v, dtype="<u1").tobytes())
            present.append(name)
    with open(f"{path_base}.bin", "wb") as fh:
        for c in chunks:
            fh.write(c)
    with open(f"{path_base}.txt", "w", encoding="utf-8") as fh:
        fh.write("bifield-samples 1\n")
        fh.write(f"count {len(samples)}\n")
        fh.write(f"source {samples.source.value}\n")
        fh.write("channels " + " ".join(present) + "\n")


def load_samples(path_base: str | os.PathLike) -> SampleSet:
    with open(f"{path_base}.txt", "r", encoding="utf-8") as fh:
        meta = {}
        for ln in fh:
            parts = ln.split()
            if parts:
                meta[parts[0]] = parts[1:]
    n = int(meta["count"][0])
    source = SampleSource(meta["source"][0])
    channels = meta.get("channels", [])
    with open(f"{path_base}.bin", "rb") as fh:
        raw = fh.read()
    pts = np.frombuffer(raw, dtype="<f8", count=n * 3).reshape(n, 3).copy()
    offset = n * 3 * 8
    kw = {}
    for name in channels:
        kw[name] = np.frombuffer(raw, dtype="<u1", count=n, offset=offset).copy()
        offset += n
    return SampleSet(points=pts, source=source, **kw)


def save_scene_manifest(
    path: str | os.PathLike,
    scene: ComposedScene,
    human_path: str,
    object_path: str,
    samples_base: str,
    kind: str,
    material: str = "rigid",
    pose_params: dict | None = None,
):
    """Structured-text record of how a scene was composed."""
    doc = {
        "format": "bifield-scene/1",
        "kind": kind,  # synthetic | synthetic_object_only | real
        "human_mesh": human_path,
        "object_mesh": object_path,
        "samples": samples_base,
        "material": material,
        "seed": scene.seed,
        "placement": {
            "rotation": scene.rotation.ravel().tolist(),
            "translation": scene.translation.tolist(),
            "scale": scene.scale,
        },
        "pose": pose_params or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scene_manifest(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "bifield-scene/1":
        raise ValueError(f"{path}: unsupported scene manifest format")
    return doc
