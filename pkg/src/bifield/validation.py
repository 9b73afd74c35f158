"""Input validation helpers.

Small coercion/checking utilities in the spirit of scikit-learn's
``check_array``: every public entry point funnels raw user input through
these so downstream code can assume well-formed float64 arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import NonOrthonormalRotation, NonUnitDirection, ShapeMismatch

# Single global geometric epsilon for on-surface classification.
GEOM_EPS = 1e-6

ORTHO_TOL = 1e-6


def as_points(x, name: str = "points") -> np.ndarray:
    """Coerce to an (n, 3) float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1 and a.size == 3:
        a = a.reshape(1, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ShapeMismatch(f"{name} must have shape (n, 3), got {a.shape}")
    return np.ascontiguousarray(a)


def as_point(x, name: str = "point") -> np.ndarray:
    """Coerce to a single 3-vector (float64)."""
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    if a.size != 3:
        raise ShapeMismatch(f"{name} must be a 3-vector, got size {a.size}")
    return a


def as_matrix(x, shape: tuple[int, int], name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape != shape:
        raise ShapeMismatch(f"{name} must have shape {shape}, got {a.shape}")
    return a


def check_rotation(r, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate a 3x3 orthonormal rotation (det +1) to `tol`."""
    a = as_matrix(r, (3, 3), "rotation")
    if not np.allclose(a.T @ a, np.eye(3), atol=tol):
        raise NonOrthonormalRotation("rotation matrix is not orthonormal")
    if np.linalg.det(a) < 0:
        raise NonOrthonormalRotation("rotation matrix has negative determinant")
    return a


def check_unit(v, tol: float = GEOM_EPS, name: str = "direction") -> np.ndarray:
    """Validate unit length of one vector or a batch of row vectors."""
    a = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(a, axis=-1)
    if np.any(np.abs(n - 1.0) > tol):
        raise NonUnitDirection(f"{name} must be unit length (|norm-1| <= {tol})")
    return a


def check_probabilities(s, name: str = "occupancy") -> np.ndarray:
    a = np.asarray(s, dtype=np.float64)
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError(f"{name} values must lie in [0, 1]")
    return a


def require_same_length(*arrays, names: tuple[str, ...] | None = None):
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        label = ", ".join(names) if names else "inputs"
        raise ShapeMismatch(f"{label} must have equal length, got {sorted(lengths)}")
