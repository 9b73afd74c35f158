"""Exception hierarchy shared across the package.

Every data-level failure raises a subclass of :class:`BifieldError` so the
CLI can distinguish bad input (exit 1) from usage mistakes (exit 2).
"""


class BifieldError(Exception):
    """Base class for all package-specific errors."""


class EmptyMesh(BifieldError):
    """Mesh has no faces (or no vertices) where a non-empty one is required."""


class NonWatertight(BifieldError):
    """Mesh fails the closed-manifold check (edge not shared by exactly two
    faces with consistent winding)."""


class NonOrthonormalRotation(BifieldError):
    """Matrix passed as a rotation is not orthonormal within tolerance."""


class BehindCamera(BifieldError):
    """3D point has non-positive camera-space depth; projection undefined."""


class MissingLabels(BifieldError):
    """Mesh lacks the per-vertex instance labels an operation requires."""


class NonUnitDirection(BifieldError):
    """Direction vector is not unit length within tolerance."""


class ShapeMismatch(BifieldError):
    """Array shapes disagree with the parameter/gradient layout."""


class MissingInstanceGroundTruth(BifieldError):
    """Instance-channel supervision requested for samples that carry none."""


class MissingGroundTruth(BifieldError):
    """A training scene lacks the ground truth its routing requires."""


class InvalidWeights(BifieldError):
    """Skinning weights are negative or rows do not sum to one."""


class SingularBlend(BifieldError):
    """A vertex's blended skinning transform is numerically singular."""


class EmptySet(BifieldError):
    """Point set is empty where a non-empty one is required."""


class RigMismatch(BifieldError):
    """Per-view input lists (cameras, depths, labels) have unequal lengths."""
