import numpy as np
import pytest

from bifield.cameras import (
    Camera,
    KSpec,
    load_rig,
    look_at,
    project,
    project_points,
    rig_circle,
    rig_sphere,
    save_rig,
    view_directions,
)
from bifield.errors import BehindCamera


@pytest.fixture()
def ideal_cam():
    k = np.array([[100.0, 0.0, 0.0], [0.0, 100.0, 0.0], [0.0, 0.0, 1.0]])
    return Camera(K=k, R=np.eye(3), t=np.zeros(3), width=512, height=512)


class TestProject:
    def test_optical_axis(self, ideal_cam):
        pix, c = project(ideal_cam, (0.0, 0.0, 1.0))
        assert np.allclose(pix, [0.0, 0.0])
        assert c == pytest.approx(1.0)

    def test_off_axis_hand_evaluated(self, ideal_cam):
        pix, c = project(ideal_cam, (1.0, 0.0, 1.0))
        assert np.allclose(pix, [100.0, 0.0])
        assert c == pytest.approx(np.sqrt(2.0))

    def test_behind_camera_raises(self, ideal_cam):
        with pytest.raises(BehindCamera):
            project(ideal_cam, (0.0, 0.0, -1.0))
        with pytest.raises(BehindCamera):
            project(ideal_cam, (1.0, 1.0, 0.0))

    def test_distance_identity_both_forms(self, rng):
        cam = look_at((2.0, 1.0, 3.0), (0.0, 0.0, 0.0), KSpec(64, 64))
        for _ in range(50):
            x = rng.normal(size=3)
            c1 = np.linalg.norm(cam.R @ x + cam.t)
            c2 = np.linalg.norm(x + np.linalg.inv(cam.R) @ cam.t)
            assert abs(c1 - c2) <= 1e-12 * max(1.0, c1)

    def test_batch_matches_single(self, ideal_cam, rng):
        pts = rng.uniform(0.1, 2.0, size=(20, 3))
        pix, dist, front = project_points(ideal_cam, pts)
        assert front.all()
        for i in range(20):
            p1, c1 = project(ideal_cam, pts[i])
            assert np.allclose(pix[i], p1)
            assert dist[i] == pytest.approx(c1)


class TestRigs:
    def test_circle_six_views_equal_gaps(self):
        lookat = np.array([0.1, 0.2, 0.0])
        cams = rig_circle(6, 2.0, 0.3, lookat)
        az = sorted(
            np.arctan2((c.center - lookat)[1], (c.center - lookat)[0]) for c in cams
        )
        gaps = np.diff(az)
        assert np.allclose(gaps, np.pi / 3, atol=1e-9)

    def test_circle_single_camera_on_x_axis(self):
        (cam,) = rig_circle(1, 3.0, 0.0, (0.0, 0.0, 0.0))
        assert np.allclose(cam.center, [3.0, 0.0, 0.0], atol=1e-12)

    def test_forward_axis_through_lookat(self):
        lookat = np.array([0.3, -0.2, 0.5])
        for cam in rig_circle(5, 1.5, 0.4, lookat):
            v = lookat - cam.center
            assert np.linalg.norm(np.cross(v / np.linalg.norm(v), cam.forward)) < 1e-9

    def test_sphere_rig_radius_and_count(self):
        cams = rig_sphere(64, 3.0, (0.0, 0.0, 0.0))
        assert len(cams) == 64
        for cam in cams:
            assert abs(np.linalg.norm(cam.center) - 3.0) < 1e-9

    def test_sphere_rig_min_angle(self):
        for n in (4, 16, 64):
            cams = rig_sphere(n, 1.0, (0.0, 0.0, 0.0))
            dirs = np.array([c.center / np.linalg.norm(c.center) for c in cams])
            dots = dirs @ dirs.T
            np.fill_diagonal(dots, -1.0)
            min_angle = np.arccos(np.clip(dots.max(), -1, 1))
            ideal = np.sqrt(4.0 * np.pi / n)
            assert min_angle >= 0.5 * ideal

    def test_rigs_deterministic(self):
        a = rig_sphere(16, 2.0, (0, 0, 0))
        b = rig_sphere(16, 2.0, (0, 0, 0))
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.R, cb.R) and np.array_equal(ca.t, cb.t)

    def test_n4_min_angle_50deg(self):
        cams = rig_sphere(4, 1.0, (0, 0, 0))
        dirs = np.array([c.center / np.linalg.norm(c.center) for c in cams])
        dots = dirs @ dirs.T
        np.fill_diagonal(dots, -1.0)
        assert np.degrees(np.arccos(np.clip(dots.max(), -1, 1))) >= 50.0


class TestCameraValidation:
    def test_k_must_be_upper_triangular_positive(self):
        with pytest.raises(ValueError):
            Camera(K=np.eye(3) * -1, R=np.eye(3), t=np.zeros(3), width=8, height=8)
        bad = np.eye(3)
        bad[1, 0] = 2.0
        with pytest.raises(ValueError):
            Camera(K=bad, R=np.eye(3), t=np.zeros(3), width=8, height=8)

    def test_view_directions_unit(self, rng):
        cam = look_at((1.0, 2.0, 0.5), (0, 0, 0), KSpec(32, 32))
        d = view_directions(cam, rng.normal(size=(10, 3)))
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


def test_rig_io_roundtrip(tmp_path):
    cams = rig_circle(6, 2.0, 0.3, (0.1, 0.2, 0.0), KSpec(320, 240, 200.0))
    save_rig(tmp_path / "rig.txt", cams)
    back = load_rig(tmp_path / "rig.txt")
    assert len(back) == 6
    for a, b in zip(cams, back):
        assert np.array_equal(a.K, b.K)
        assert np.array_equal(a.R, b.R)
        assert np.array_equal(a.t, b.t)
        assert (a.width, a.height) == (b.width, b.height)
