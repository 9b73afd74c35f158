import numpy as np
import pytest

from bifield.primitives import make_box, make_capsule, make_icosphere, make_torus


@pytest.fixture(scope="session")
def unit_sphere():
    return make_icosphere(1.0, 3)


@pytest.fixture(scope="session")
def fine_sphere():
    return make_icosphere(1.0, 4)


@pytest.fixture(scope="session")
def unit_box():
    return make_box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def torus():
    return make_torus(1.0, 0.3, n_major=96, n_minor=48)


@pytest.fixture(scope="session")
def capsule():
    return make_capsule(0.12, 1.2, n_segments=20, n_rings=8, n_length=12)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def sphere_band(mesh, radius: float) -> float:
    """Width of the surface band where a faceted sphere and the smooth
    sphere legitimately disagree: facet chord depth plus the geometric eps."""
    normals = mesh.face_normals()
    first = mesh.triangles()[:, 0]
    inner = np.abs(np.einsum("ij,ij->i", normals, first)).min()
    return radius - min(inner, radius) + 1e-6


def torus_band(mesh, major: float, minor: float) -> float:
    """Conservative facet-deviation band for a torus tessellation, probed at
    face centroids and edge midpoints."""
    tri = mesh.triangles()
    probes = np.concatenate(
        [tri.mean(axis=1), (tri[:, 0] + tri[:, 1]) / 2, (tri[:, 1] + tri[:, 2]) / 2,
         (tri[:, 2] + tri[:, 0]) / 2]
    )
    q = np.stack(
        [np.sqrt(probes[:, 0] ** 2 + probes[:, 1] ** 2) - major, probes[:, 2]], axis=1
    )
    dev = np.abs(np.linalg.norm(q, axis=1) - minor).max()
    return 1.5 * dev + 1e-6


def torus_inside_analytic(points, major: float, minor: float):
    x, y, z = points.T
    return (x * x + y * y + z * z + major**2 - minor**2) ** 2 < 4 * major**2 * (x * x + y * y)
