import numpy as np
import pytest

from bifield.cameras import KSpec, look_at, project_points
from bifield.errors import MissingLabels
from bifield.mesh import TriMesh
from bifield.primitives import make_box, make_icosphere, merge
from bifield.render import (
    BACKGROUND_LABEL,
    load_depth_map,
    load_label_map,
    load_map,
    render_depth,
    render_labels,
    render_view,
    save_depth_map,
    save_label_map,
    save_map,
)

KS = KSpec(128, 128)


@pytest.fixture(scope="module")
def cam():
    return look_at((3.0, 0.0, 0.0), (0.0, 0.0, 0.0), KS)


class TestRenderDepth:
    def test_sphere_center_pixel_distance(self, cam, unit_sphere):
        dm = render_depth(cam, unit_sphere)
        # principal point maps to pixel ((w-1)/2, (h-1)/2): nearest integer pixels
        for px in (63, 64):
            for py in (63, 64):
                d = dm.depth[py, px]
                assert d == pytest.approx(2.0, abs=0.01)

    def test_empty_mesh_all_inf(self, cam):
        dm = render_depth(cam, TriMesh(np.zeros((0, 3)), np.zeros((0, 3), int)))
        assert np.all(np.isinf(dm.depth))

    def test_zbuffer_upper_bound(self, cam, unit_sphere):
        dm = render_depth(cam, unit_sphere)
        _, dist, _ = project_points(cam, unit_sphere.vertices)
        covered = np.isfinite(dm.depth)
        assert dm.depth[covered].max() <= dist.max() + 1e-9

    def test_project_render_consistency(self, cam, fine_sphere):
        dm = render_depth(cam, fine_sphere)
        pix, dist, front = project_points(cam, fine_sphere.vertices)
        ij = np.round(pix).astype(int)
        ok = (
            front
            & (ij[:, 0] >= 0) & (ij[:, 0] < dm.width)
            & (ij[:, 1] >= 0) & (ij[:, 1] < dm.height)
        )
        # convex solid: front-facing vertices are exactly the visible ones;
        # depth must match within 2 pixels' worth of local surface slope
        v = fine_sphere.vertices
        ray = v - cam.center
        ray /= np.linalg.norm(ray, axis=1, keepdims=True)
        cos_inc = -np.einsum("ij,ij->i", v, ray)  # unit sphere: normal = v
        sel = ok & (cos_inc > 0.1) & np.isfinite(d_at_full := dm.depth[ij[:, 1].clip(0, dm.height - 1), ij[:, 0].clip(0, dm.width - 1)])
        tan_inc = np.sqrt(np.clip(1.0 - cos_inc**2, 0.0, 1.0)) / np.clip(cos_inc, 1e-6, None)
        tol = 2.0 * (dist / KS.matrix()[0, 0]) * tan_inc + 0.02
        err = np.abs(d_at_full[sel] - dist[sel])
        assert sel.sum() > 500
        assert np.all(err <= tol[sel])


class TestRenderLabels:
    def test_constant_labels(self, cam):
        mesh = make_icosphere(0.5, 2, label=0)
        lm = render_labels(cam, mesh)
        covered = lm.labels != BACKGROUND_LABEL
        assert covered.any()
        assert np.all(lm.labels[covered] == 0)

    def test_background_sentinel(self, cam):
        lm = render_labels(cam, make_icosphere(0.2, 1, label=1))
        assert (lm.labels == BACKGROUND_LABEL).sum() > 0

    def test_requires_labels(self, cam, unit_sphere):
        with pytest.raises(MissingLabels):
            render_labels(cam, unit_sphere)

    def test_disjoint_primitives_match_silhouettes(self, cam):
        a = make_icosphere(0.35, 2, center=(0.0, -0.6, 0.0), label=0)
        b = make_box((-0.25, 0.35, -0.25), (0.25, 0.85, 0.25), label=1)
        scene = merge([a, b])
        lm = render_labels(cam, scene)
        sil_a = np.isfinite(render_depth(cam, a).depth)
        sil_b = np.isfinite(render_depth(cam, b).depth)
        assert not (sil_a & sil_b).any()  # non-overlapping in view
        assert np.array_equal(lm.labels == 0, sil_a)
        assert np.array_equal(lm.labels == 1, sil_b)

    def test_render_view_consistent_with_separate_passes(self, cam):
        scene = merge([
            make_icosphere(0.3, 2, center=(0.0, -0.5, 0.0), label=0),
            make_box((-0.2, 0.3, -0.2), (0.2, 0.7, 0.2), label=1),
        ])
        dmap, lmap, intensity = render_view(cam, scene)
        assert np.array_equal(dmap.depth, render_depth(cam, scene).depth)
        assert np.array_equal(lmap.labels, render_labels(cam, scene).labels)
        covered = np.isfinite(dmap.depth)
        assert intensity[~covered].max() == 0.0
        assert 0.0 < intensity[covered].max() <= 1.0


class TestMapIO:
    def test_depth_roundtrip(self, tmp_path, cam, unit_sphere):
        dm = render_depth(cam, unit_sphere)
        save_depth_map(tmp_path / "d", dm)
        back = load_depth_map(tmp_path / "d")
        assert back.depth.shape == dm.depth.shape
        assert np.allclose(
            back.depth[np.isfinite(dm.depth)], dm.depth[np.isfinite(dm.depth)], rtol=1e-6
        )

    def test_label_roundtrip(self, tmp_path, cam):
        lm = render_labels(cam, make_icosphere(0.5, 2, label=1))
        save_label_map(tmp_path / "l", lm)
        assert np.array_equal(load_label_map(tmp_path / "l").labels, lm.labels)

    def test_raw_map_header(self, tmp_path):
        arr = np.arange(12, dtype=np.float64).reshape(3, 4)
        save_map(tmp_path / "m", arr, "float64")
        assert np.array_equal(load_map(tmp_path / "m"), arr)
        header = (tmp_path / "m.txt").read_text()
        assert "dtype float64" in header and "shape 3 4" in header
