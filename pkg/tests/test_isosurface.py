import numpy as np
import pytest

from bifield.isosurface import ScalarGrid, marching_cubes, sample_grid
from bifield.mesh import Aabb

BOX = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def sphere_occupancy(points, radius=0.5):
    return (np.linalg.norm(points, axis=1) < radius).astype(float)


def smooth_radial(points, radius=0.5, sharpness=8.0):
    return 1.0 / (1.0 + np.exp(-sharpness * (radius - np.linalg.norm(points, axis=1))))


class TestScalarGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScalarGrid(values=np.zeros((1, 4, 4)), box=BOX)
        with pytest.raises(ValueError):
            ScalarGrid(values=np.full((4, 4, 4), np.nan), box=BOX)

    def test_sample_grid_shapes_and_axes(self):
        g = sample_grid(lambda p: p[:, 0], BOX, (4, 5, 6))
        assert g.values.shape == (4, 5, 6)
        ax, ay, az = g.axes()
        assert ax[0] == -1.0 and ax[-1] == 1.0 and len(ay) == 5
        assert np.allclose(g.values[:, 0, 0], ax)


class TestMarchingCubes:
    def test_sphere_vertices_within_two_cells(self):
        g = sample_grid(sphere_occupancy, BOX, 64)
        mesh = marching_cubes(g, 0.5)
        assert mesh.n_faces > 0
        r = np.linalg.norm(mesh.vertices, axis=1)
        cell = 2.0 / 63
        assert np.abs(r - 0.5).max() <= 2.0 * cell

    def test_constant_field_empty(self):
        g = ScalarGrid(values=np.zeros((8, 8, 8)), box=BOX)
        assert marching_cubes(g, 0.5).n_faces == 0
        g1 = ScalarGrid(values=np.ones((8, 8, 8)), box=BOX)
        assert marching_cubes(g1, 0.5).n_faces == 0

    def test_refinement_error_decreases(self):
        errs = []
        for res in (32, 64, 128):
            g = sample_grid(smooth_radial, BOX, res)
            mesh = marching_cubes(g, 0.5)
            errs.append(np.abs(np.linalg.norm(mesh.vertices, axis=1) - 0.5).max())
        assert errs[0] > errs[1] > errs[2]
        # observed convergence order >= 1: halving the cell at least halves the error
        assert errs[1] <= errs[0] / 1.9 and errs[2] <= errs[1] / 1.9

    def test_watertight_genus_zero_on_radial_field(self):
        g = sample_grid(smooth_radial, BOX, 48)
        mesh = marching_cubes(g, 0.5)
        assert mesh.is_watertight()
        assert mesh.euler_characteristic() == 2

    def test_outward_winding_positive_volume(self):
        g = sample_grid(sphere_occupancy, BOX, 32)
        mesh = marching_cubes(g, 0.5)
        vol = mesh.signed_volume()
        assert vol > 0
        assert vol == pytest.approx(4.0 / 3.0 * np.pi * 0.125, rel=0.1)

    def test_multi_component_and_binary_fields_stay_closed(self, rng):
        for trial in range(4):
            centers = rng.uniform(-0.4, 0.4, size=(3, 3))
            radii = rng.uniform(0.1, 0.3, size=3)

            def occ(p):
                hits = [np.linalg.norm(p - c, axis=1) < r for c, r in zip(centers, radii)]
                return np.any(hits, axis=0).astype(float)

            mesh = marching_cubes(sample_grid(occ, BOX, 24), 0.5)
            assert mesh.is_watertight()
            assert mesh.euler_characteristic() % 2 == 0

    def test_deterministic(self):
        g = sample_grid(smooth_radial, BOX, 24)
        a = marching_cubes(g, 0.5)
        b = marching_cubes(g, 0.5)
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.faces, b.faces)

    def test_iso_level_shifts_surface(self):
        g = sample_grid(lambda p: smooth_radial(p, 0.5, 12.0), BOX, 64)
        inner = marching_cubes(g, 0.731)  # sigmoid(1) -> r = 0.5 - 1/12
        outer = marching_cubes(g, 0.269)  # sigmoid(-1) -> r = 0.5 + 1/12
        r_in = np.linalg.norm(inner.vertices, axis=1).mean()
        r_out = np.linalg.norm(outer.vertices, axis=1).mean()
        assert r_in == pytest.approx(0.5 - 1.0 / 12.0, abs=0.01)
        assert r_out == pytest.approx(0.5 + 1.0 / 12.0, abs=0.01)
