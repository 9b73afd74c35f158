import numpy as np
import pytest

from bifield.errors import EmptyMesh, NonOrthonormalRotation, NonWatertight
from bifield.mesh import (
    Aabb,
    SampleSet,
    SampleSource,
    TriMesh,
    inside,
    nearest_surface_distance,
    sample_points,
    transform,
)
from bifield.primitives import make_box, make_icosphere

from conftest import sphere_band, torus_band, torus_inside_analytic


class TestTriMesh:
    def test_degenerate_faces_dropped_with_warning(self):
        v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
        f = [[0, 1, 2], [0, 1, 1], [0, 1, 3]]  # middle face repeats a vertex
        with pytest.warns(UserWarning, match="degenerate"):
            m = TriMesh(v, f)
        assert m.n_faces == 2
        assert m.n_degenerate_dropped == 1

    def test_face_index_out_of_range(self):
        with pytest.raises(ValueError):
            TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 5]])

    def test_watertight_detects_open_mesh(self, unit_sphere):
        assert unit_sphere.is_watertight()
        open_mesh = TriMesh(unit_sphere.vertices, unit_sphere.faces[:-1])
        assert not open_mesh.is_watertight()
        with pytest.raises(NonWatertight):
            inside(open_mesh, (0.0, 0.0, 0.0))

    def test_watertight_detects_inconsistent_winding(self, unit_sphere):
        flipped = unit_sphere.faces.copy()
        flipped[0] = flipped[0][::-1]
        assert not TriMesh(unit_sphere.vertices, flipped).is_watertight()

    def test_euler_characteristic(self, unit_sphere, torus):
        assert unit_sphere.euler_characteristic() == 2
        assert torus.euler_characteristic() == 0


class TestAabb:
    def test_invariant(self):
        with pytest.raises(ValueError):
            Aabb((0, 0, 1), (1, 1, 0))
        box = Aabb((0, 0, 0), (2, 1, 1))
        assert box.diagonal == pytest.approx(np.sqrt(6.0))
        assert box.volume == pytest.approx(2.0)


class TestSampleSet:
    def test_union_is_max_of_channels(self):
        pts = np.zeros((3, 3))
        ss = SampleSet(points=pts, source=SampleSource.SYNTHETIC_INSTANCE,
                       occ_human=[1, 0, 1], occ_object=[0, 0, 1])
        assert np.array_equal(ss.occ_union, [1, 0, 1])
        with pytest.raises(ValueError):
            SampleSet(points=pts, source=SampleSource.SYNTHETIC_INSTANCE,
                      occ_human=[1, 0, 1], occ_object=[0, 0, 1], occ_union=[0, 0, 1])

    def test_real_union_has_no_instance_channels(self):
        with pytest.raises(ValueError):
            SampleSet(points=np.zeros((1, 3)), source=SampleSource.REAL_UNION,
                      occ_human=[1], occ_object=[1])


class TestInside:
    def test_sphere_center_and_outside(self, unit_sphere):
        assert inside(unit_sphere, (0.0, 0.0, 0.0)) is True
        assert inside(unit_sphere, (2.0, 0.0, 0.0)) is False

    def test_box_point(self, unit_box):
        assert inside(unit_box, (0.25, 0.75, 0.5)) is True

    def test_box_analytic_agreement_100k(self, unit_box, rng):
        pts = rng.uniform(-0.3, 1.3, size=(100000, 3))
        got = inside(unit_box, pts)
        want = np.all((pts > 0.0) & (pts < 1.0), axis=1)
        # exclude only points within 1e-6 of a face plane (superset of the
        # surface band: the box mesh is the exact analytic box)
        comp = np.minimum(np.abs(pts), np.abs(1.0 - pts))
        check = comp.min(axis=1) > 1e-6
        assert np.array_equal(got[check], want[check])
        assert check.sum() > 99000

    def test_sphere_analytic_agreement(self, fine_sphere, rng):
        pts = rng.uniform(-1.3, 1.3, size=(100000, 3))
        got = inside(fine_sphere, pts)
        r = np.linalg.norm(pts, axis=1)
        band = sphere_band(fine_sphere, 1.0)
        check = np.abs(r - 1.0) > band
        assert np.array_equal(got[check], r[check] < 1.0)
        assert check.sum() > 95000

    def test_torus_analytic_agreement(self, torus, rng):
        pts = rng.uniform(-1.5, 1.5, size=(100000, 3))
        got = inside(torus, pts)
        want = torus_inside_analytic(pts, 1.0, 0.3)
        q = np.stack([np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2) - 1.0, pts[:, 2]], axis=1)
        sdf = np.abs(np.linalg.norm(q, axis=1) - 0.3)
        check = sdf > torus_band(torus, 1.0, 0.3)
        assert np.array_equal(got[check], want[check])
        assert check.sum() > 90000


class TestNearestSurfaceDistance:
    def test_sphere_center(self, unit_sphere):
        d = nearest_surface_distance(unit_sphere, (0.0, 0.0, 0.0))
        band = sphere_band(unit_sphere, 1.0)
        assert 1.0 - band <= d <= 1.0

    def test_on_vertex_is_zero(self, unit_box):
        assert nearest_surface_distance(unit_box, unit_box.vertices[5]) == 0.0

    def test_axis_aligned_face_distance(self, unit_box):
        assert nearest_surface_distance(unit_box, (2.0, 0.5, 0.5)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_iff_on_face(self, unit_sphere, rng):
        tri = unit_sphere.triangles()
        picks = rng.integers(0, len(tri), size=200)
        u = rng.uniform(size=(200, 1))
        v = rng.uniform(size=(200, 1)) * (1.0 - u)
        w = 1.0 - u - v
        on_face = u * tri[picks, 0] + v * tri[picks, 1] + w * tri[picks, 2]
        d = nearest_surface_distance(unit_sphere, on_face)
        assert d.max() < 1e-9
        off = on_face + 1e-3 * unit_sphere.face_normals()[picks]
        assert nearest_surface_distance(unit_sphere, off).min() > 1e-9 / 2

    def test_empty_mesh_raises(self):
        with pytest.raises(EmptyMesh):
            nearest_surface_distance(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), int)), (0, 0, 0))

    def test_matches_brute_force(self, rng):
        mesh = make_icosphere(0.7, 1)
        pts = rng.uniform(-1.2, 1.2, size=(100, 3))
        fast = nearest_surface_distance(mesh, pts)
        tri = mesh.triangles()
        brute = np.empty(len(pts))
        from bifield.mesh import _point_triangle_distance_sq

        for i, p in enumerate(pts):
            rep = np.repeat(p[None], len(tri), axis=0)
            brute[i] = np.sqrt(
                _point_triangle_distance_sq(rep, tri[:, 0], tri[:, 1], tri[:, 2]).min()
            )
        assert np.allclose(fast, brute, atol=1e-12)


class TestSamplePoints:
    def test_count_and_bounds(self, unit_sphere):
        pts = sample_points(unit_sphere, 6000, sigma=0.05, bbox_pad=0.1, rng_seed=3)
        assert pts.shape == (6000, 3)
        box = unit_sphere.aabb().padded(0.1)
        assert box.contains(pts).all()

    def test_deterministic_and_seed_sensitive(self, unit_sphere):
        a = sample_points(unit_sphere, 500, 0.05, 0.1, rng_seed=7)
        b = sample_points(unit_sphere, 500, 0.05, 0.1, rng_seed=7)
        c = sample_points(unit_sphere, 500, 0.05, 0.1, rng_seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_sigma_zero_limit_on_surface(self, unit_sphere):
        pts = sample_points(unit_sphere, 400, sigma=1e-12, bbox_pad=0.1, rng_seed=0)
        surf = pts[:200]  # surface half comes first
        assert nearest_surface_distance(unit_sphere, surf).max() < 1e-6

    def test_gaussian_half_splits_inside_outside(self, fine_sphere):
        pts = sample_points(fine_sphere, 100000, sigma=0.05, bbox_pad=0.1, rng_seed=11)
        surf = pts[:50000]
        frac = np.mean(np.linalg.norm(surf, axis=1) < 1.0)
        assert 0.45 <= frac <= 0.55

    def test_validation(self, unit_sphere):
        with pytest.raises(ValueError):
            sample_points(unit_sphere, 0, 0.1)
        with pytest.raises(ValueError):
            sample_points(unit_sphere, 10, -1.0)


class TestTransform:
    def test_identity_bitwise(self, unit_sphere):
        out = transform(unit_sphere, np.eye(3), np.zeros(3), 1.0)
        assert np.array_equal(out.vertices, unit_sphere.vertices)

    def test_scale_doubles_aabb(self, unit_sphere):
        out = transform(unit_sphere, np.eye(3), np.zeros(3), 2.0)
        assert np.allclose(out.aabb().extent, 2.0 * unit_sphere.aabb().extent)

    def test_rotation_table(self):
        r = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        m = TriMesh([[1, 0, 0], [0, 0, 1], [1, 1, 1]], [[0, 1, 2]])
        out = transform(m, r, np.zeros(3), 1.0)
        assert np.allclose(out.vertices[0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_preserves_watertight_and_euler(self, unit_sphere, rng):
        q = rng.normal(size=(3, 3))
        r, _ = np.linalg.qr(q)
        if np.linalg.det(r) < 0:
            r[:, 0] = -r[:, 0]
        out = transform(unit_sphere, r, rng.normal(size=3), 1.7)
        assert out.is_watertight()
        assert out.euler_characteristic() == unit_sphere.euler_characteristic()

    def test_rejects_non_orthonormal(self, unit_sphere):
        with pytest.raises(NonOrthonormalRotation):
            transform(unit_sphere, np.eye(3) * 1.01, np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            transform(unit_sphere, np.eye(3), np.zeros(3), -1.0)

    def test_labels_preserved(self):
        m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], vertex_labels=[0, 1, 1])
        out = transform(m, np.eye(3), (1, 2, 3), 1.0)
        assert np.array_equal(out.vertex_labels, [0, 1, 1])
