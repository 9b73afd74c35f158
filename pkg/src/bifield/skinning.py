"""Linear blend skinning over a kinematic tree.

Forward LBS, exact per-vertex inverse LBS, nearest-vertex weight transfer
onto scans, and the upper/lower pose-concatenation repose used to turn
standing bodies into seated ones. Templates here are procedural desk-scale
stand-ins (a capsule limb with a joint chain); the math is the standard
parametric-body formulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidWeights, SingularBlend
from .mesh import TriMesh


@dataclass
class Pose:
    """Per-joint axis-angle rotations (radians) plus a root translation."""

    rotations: np.ndarray  # (j, 3)
    root_translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(-1, 3)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.rotations)) or not np.all(np.isfinite(self.root_translation)):
            raise ValueError("pose parameters must be finite")
        if np.any(np.linalg.norm(self.rotations, axis=1) >= 2.0 * np.pi):
            raise ValueError("axis-angle magnitude must stay below 2*pi")

    @property
    def n_joints(self) -> int:
        return len(self.rotations)

    @staticmethod
    def identity(n_joints: int) -> "Pose":
        return Pose(np.zeros((n_joints, 3)), np.zeros(3))


@dataclass
class SkinnedTemplate:
    """Rest mesh, kinematic tree, skinning weights and the upper/lower split."""

    rest_mesh: TriMesh
    joints: np.ndarray  # (j, 3) rest positions
    parents: np.ndarray  # (j,) parent indices, -1 for the single root
    weights: np.ndarray  # (v, j), rows sum to 1
    upper: np.ndarray  # joint indices in the upper group
    lower: np.ndarray  # joint indices in the lower group

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64).reshape(-1, 3)
        self.parents = np.asarray(self.parents, dtype=np.int64).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.int64).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=np.int64).reshape(-1)
        j = len(self.joints)
        if len(self.parents) != j:
            raise ValueError("parents length must match joint count")
        if sorted(np.concatenate([self.upper, self.lower]).tolist()) != list(range(j)):
            raise ValueError("upper/lower groups must partition the joints")
        if (self.parents == -1).sum() != 1:
            raise ValueError("kinematic tree needs exactly one root")
        for i, p in enumerate(self.parents):  # acyclicity: parents precede children
            if p >= i:
                raise ValueError("parents must be topologically ordered (parent < child)")
        validate_weights(self.weights, self.rest_mesh.n_vertices, j)

    @property
    def n_joints(self) -> int:
        return len(self.joints)


def validate_weights(weights: np.ndarray, n_vertices: int, n_joints: int):
    if weights.shape != (n_vertices, n_joints):
        raise InvalidWeights(
            f"weights must be ({n_vertices}, {n_joints}), got {weights.shape}"
        )
    if np.any(weights < 0):
        raise InvalidWeights("weights must be non-negative")
    if np.any(np.abs(weights.sum(axis=1) - 1.0) > 1e-9):
        raise InvalidWeights("weight rows must sum to 1 within 1e-9")


def _rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """Batch axis-angle -> rotation matrices, exact identity at zero angle."""
    aa = np.asarray(axis_angle, dtype=np.float64).reshape(-1, 3)
    theta = np.linalg.norm(aa, axis=1)
    out = np.tile(np.eye(3), (len(aa), 1, 1))
    nz = theta > 1e-300
    if not nz.any():
        return out
    k = aa[nz] / theta[nz, None]
    kx, ky, kz = k[:, 0], k[:, 1], k[:, 2]
    zero = np.zeros_like(kx)
    K = np.stack(
        [
            np.stack([zero, -kz, ky], axis=-1),
            np.stack([kz, zero, -kx], axis=-1),
            np.stack([-ky, kx, zero], axis=-1),
        ],
        axis=1,
    )
    s = np.sin(theta[nz])[:, None, None]
    c = (1.0 - np.cos(theta[nz]))[:, None, None]
    out[nz] = np.eye(3) + s * K + c * (K @ K)
    return out


def _skinning_transforms(joints, parents, pose: Pose):
    """Per-joint rest-to-posed affine transforms (R (j,3,3), t (j,3))."""
    j = len(joints)
    rot = _rodrigues(pose.rotations)
    g_r = np.empty((j, 3, 3))
    g_t = np.empty((j, 3))
    for i in range(j):
        p = parents[i]
        offset = joints[i] - (joints[p] if p >= 0 else 0.0)
        if p < 0:
            g_r[i] = rot[i]
            g_t[i] = offset
        else:
            g_r[i] = g_r[p] @ rot[i]
            g_t[i] = g_r[p] @ offset + g_t[p]
    a_r = g_r
    a_t = g_t - np.einsum("jab,jb->ja", g_r, joints) + pose.root_translation
    return a_r, a_t


def _blend(weights, a_r, a_t):
    m = np.einsum("vj,jab->vab", weights, a_r)
    c = weights @ a_t
    return m, c


def lbs_forward(tmpl: SkinnedTemplate, pose: Pose, mesh: TriMesh | None = None,
                weights=None) -> TriMesh:
    """Standard LBS: v' = sum_j w_j T_j(pose) v. Identity pose returns the rest mesh.

    Pass `mesh`/`weights` to skin a scan with transferred weights instead of
    the template's own rest mesh.
    """
    if pose.n_joints != tmpl.n_joints:
        raise ValueError("pose joint count does not match template")
    src = tmpl.rest_mesh if mesh is None else mesh
    w = tmpl.weights if weights is None else weights
    validate_weights(w, src.n_vertices, tmpl.n_joints)
    a_r, a_t = _skinning_transforms(tmpl.joints, tmpl.parents, pose)
    m, c = _blend(w, a_r, a_t)
    posed = np.einsum("vab,vb->va", m, src.vertices) + c
    return TriMesh(posed, src.faces, vertex_labels=src.vertex_labels)


def lbs_inverse(tmpl: SkinnedTemplate, posed_mesh: TriMesh, pose: Pose,
                weights=None) -> TriMesh:
    """Per-vertex inversion of the blended transform, undoing `pose`.

    Raises SingularBlend when a vertex's blended matrix has |det| < 1e-9.
    """
    if pose.n_joints != tmpl.n_joints:
        raise ValueError("pose joint count does not match template")
    w = tmpl.weights if weights is None else weights
    v = posed_mesh.vertices
    validate_weights(w, len(v), tmpl.n_joints)
    a_r, a_t = _skinning_transforms(tmpl.joints, tmpl.parents, pose)
    m, c = _blend(w, a_r, a_t)
    det = np.linalg.det(m)
    if np.any(np.abs(det) < 1e-9):
        raise SingularBlend("blended skinning transform is singular for some vertex")
    rest = np.linalg.solve(m, (v - c)[..., None])[..., 0]
    return TriMesh(rest, posed_mesh.faces, vertex_labels=posed_mesh.vertex_labels)


def transfer_weights(tmpl: SkinnedTemplate, scan: TriMesh) -> np.ndarray:
    """Copy each scan vertex's weight row from the nearest template rest vertex."""
    tree = cKDTree(tmpl.rest_mesh.vertices)
    _, nearest = tree.query(scan.vertices, k=1)
    return tmpl.weights[nearest]


def concat_pose(tmpl: SkinnedTemplate, upper_pose: Pose, lower_pose: Pose) -> Pose:
    """Mixed pose: upper-group joints from `upper_pose`, lower from `lower_pose`.

    The root translation follows the pose that owns the root joint's group.
    """
    rot = np.empty((tmpl.n_joints, 3))
    rot[tmpl.upper] = upper_pose.rotations[tmpl.upper]
    rot[tmpl.lower] = lower_pose.rotations[tmpl.lower]
    root = int(np.where(tmpl.parents == -1)[0][0])
    t = upper_pose.root_translation if root in tmpl.upper else lower_pose.root_translation
    return Pose(rot, t)


def repose(tmpl: SkinnedTemplate, scan: TriMesh, scan_pose: Pose, target_lower: Pose) -> TriMesh:
    """Un-pose a scan to the rest pose, then re-pose with swapped lower-body
    parameters (upper joints keep `scan_pose`, lower joints take
    `target_lower`). The output may be non-watertight after reposing and is
    treated as object-only supervision downstream."""
    w = transfer_weights(tmpl, scan)
    rest = lbs_inverse(tmpl, scan, scan_pose, weights=w)
    mixed = concat_pose(tmpl, scan_pose, target_lower)
    return lbs_forward(tmpl, mixed, mesh=rest, weights=w)


def chain_weights(vertices: np.ndarray, joints: np.ndarray, axis: int = 2) -> np.ndarray:
    """Hat-function weights along one axis for a chain of joints.

    Each vertex blends linearly between the two joints bracketing its
    coordinate; beyond the end joints the weight saturates at 1.
    """
    coord = vertices[:, axis]
    keys = joints[:, axis]
    order = np.argsort(keys)
    keys_sorted = keys[order]
    w = np.zeros((len(vertices), len(joints)))
    seg = np.clip(np.searchsorted(keys_sorted, coord) - 1, 0, len(joints) - 2)
    lo = keys_sorted[seg]
    hi = keys_sorted[seg + 1]
    t = np.clip((coord - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0, 1.0)
    rows = np.arange(len(vertices))
    w[rows, order[seg]] = 1.0 - t
    w[rows, order[seg + 1]] += t
    return w


def make_chain_template(mesh: TriMesh, n_joints: int, axis: int = 2,
                        upper_fraction: float = 0.5) -> SkinnedTemplate:
    """Skinned template with `n_joints` evenly spaced along one axis of the mesh.

    The root joint sits at the TOP of the chain and children descend, so
    the lower joints are descendants of the upper ones: swapping the
    lower-body pose cannot move vertices weighted purely on the upper
    group. Used as the procedural stand-in body for repose fixtures.
    """
    if n_joints < 2:
        raise ValueError("need at least 2 joints")
    box_min = mesh.vertices.min(axis=0)
    box_max = mesh.vertices.max(axis=0)
    center = (box_min + box_max) / 2.0
    joints = np.tile(center, (n_joints, 1))
    joints[:, axis] = np.linspace(box_max[axis], box_min[axis], n_joints)
    parents = np.arange(-1, n_joints - 1)
    weights = chain_weights(mesh.vertices, joints, axis=axis)
    n_upper = int(round(upper_fraction * n_joints))
    n_upper = min(max(n_upper, 1), n_joints - 1)
    upper = np.arange(n_upper)  # includes the root at the top
    lower = np.arange(n_upper, n_joints)
    return SkinnedTemplate(
        rest_mesh=mesh, joints=joints, parents=parents, weights=weights,
        upper=upper, lower=lower,
    )
