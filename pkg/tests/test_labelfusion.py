import numpy as np
import pytest

from bifield.cameras import KSpec, look_at, rig_sphere
from bifield.errors import RigMismatch
from bifield.labelfusion import (
    UNLABELED,
    FusionConfig,
    TieBreak,
    fuse_rendered_views,
    label_vertices,
    resolve_delta,
    visibility_mask,
)
from bifield.mesh import TriMesh
from bifield.primitives import make_box, make_icosphere, merge
from bifield.render import DepthMap, LabelMap, render_depth, render_view

KS = KSpec(160, 160)


@pytest.fixture(scope="module")
def labeled_pair():
    a = make_icosphere(0.3, 3, center=(0.0, 0.0, 0.35), label=0)
    b = make_box((-0.25, -0.25, -0.35), (0.25, 0.25, 0.05), label=1)
    return merge([a, b])


class TestVisibility:
    def test_front_hemisphere_visible_antipodal_not(self, unit_sphere):
        cam = look_at((3.0, 0.0, 0.0), (0.0, 0.0, 0.0), KS)
        depth = render_depth(cam, unit_sphere)
        vis = visibility_mask(unit_sphere, cam, depth, delta=0.02)
        x = unit_sphere.vertices[:, 0]
        assert vis[x > 0.4].all()
        assert not vis[x < -0.4].any()

    def test_convex_visible_fraction_half(self, fine_sphere):
        cam = look_at((4.0, 1.0, 0.5), (0.0, 0.0, 0.0), KS)
        depth = render_depth(cam, fine_sphere)
        vis = visibility_mask(fine_sphere, cam, depth, delta=0.02)
        assert abs(vis.mean() - 0.5) <= 0.05

    def test_monotone_in_delta(self, unit_sphere):
        cam = look_at((3.0, 0.0, 0.0), (0.0, 0.0, 0.0), KS)
        depth = render_depth(cam, unit_sphere)
        small = visibility_mask(unit_sphere, cam, depth, delta=0.005)
        large = visibility_mask(unit_sphere, cam, depth, delta=0.1)
        assert np.all(large[small])  # evidence set grows with delta


class TestLabelVertices:
    def test_singleton_vote(self):
        mesh = TriMesh([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]], [[0, 1, 2]],
                       vertex_labels=[1, 1, 1])
        cam = look_at((0.03, 0.03, 2.0), (0.03, 0.03, 0.0), KS)
        dmap, lmap, _ = render_view(cam, mesh)
        labels = label_vertices(mesh, [cam], [dmap], [lmap], FusionConfig(n_views=1, delta=0.01))
        assert np.all(labels == 1)

    def test_majority_two_against_one(self):
        mesh = TriMesh([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]], [[0, 1, 2]],
                       vertex_labels=[0, 0, 0])
        cam = look_at((0.03, 0.03, 2.0), (0.03, 0.03, 0.0), KS)
        dmap, lmap0, _ = render_view(cam, mesh)
        lmap1 = LabelMap(labels=np.where(lmap0.labels >= 0, 1, -1).astype(np.int32))
        labels = label_vertices(
            mesh, [cam] * 3, [dmap] * 3, [lmap0, lmap0, lmap1], FusionConfig(delta=0.01)
        )
        assert np.all(labels == 0)

    def test_self_consistency_two_primitives_64_views(self, labeled_pair):
        cams = rig_sphere(64, 2.2, lookat=(0.0, 0.0, 0.0), kspec=KS)
        labels = fuse_rendered_views(labeled_pair, cams, FusionConfig(n_views=64))
        recovered = (labels == labeled_pair.vertex_labels).mean()
        assert recovered >= 0.99

    def test_unseen_vertices_unlabeled(self, labeled_pair):
        cam = look_at((2.0, 0.0, 0.3), (0.0, 0.0, 0.0), KS)
        dmap, lmap, _ = render_view(cam, labeled_pair)
        labels = label_vertices(labeled_pair, [cam], [dmap], [lmap], FusionConfig(delta=0.01))
        assert (labels == UNLABELED).sum() > 0

    def test_tie_break_modes(self):
        mesh = TriMesh([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]], [[0, 1, 2]],
                       vertex_labels=[0, 0, 0])
        cam = look_at((0.03, 0.03, 2.0), (0.03, 0.03, 0.0), KS)
        dmap, lmap0, _ = render_view(cam, mesh)
        lmap1 = LabelMap(labels=np.where(lmap0.labels >= 0, 1, -1).astype(np.int32))
        lowest = label_vertices(mesh, [cam] * 2, [dmap] * 2, [lmap0, lmap1],
                                FusionConfig(delta=0.01, tie_break=TieBreak.LOWEST_LABEL))
        assert np.all(lowest == 0)
        unl = label_vertices(mesh, [cam] * 2, [dmap] * 2, [lmap0, lmap1],
                             FusionConfig(delta=0.01, tie_break=TieBreak.UNLABELED))
        assert np.all(unl == UNLABELED)

    def test_confidence_is_modal_fraction(self):
        mesh = TriMesh([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]], [[0, 1, 2]],
                       vertex_labels=[0, 0, 0])
        cam = look_at((0.03, 0.03, 2.0), (0.03, 0.03, 0.0), KS)
        dmap, lmap0, _ = render_view(cam, mesh)
        lmap1 = LabelMap(labels=np.where(lmap0.labels >= 0, 1, -1).astype(np.int32))
        labels, conf = label_vertices(
            mesh, [cam] * 3, [dmap] * 3, [lmap0, lmap0, lmap1],
            FusionConfig(delta=0.01), return_confidence=True,
        )
        assert np.allclose(conf, 2.0 / 3.0)

    def test_rig_mismatch(self, labeled_pair):
        cam = look_at((2.0, 0.0, 0.0), (0, 0, 0), KS)
        dmap, lmap, _ = render_view(cam, labeled_pair)
        with pytest.raises(RigMismatch):
            label_vertices(labeled_pair, [cam, cam], [dmap], [lmap], FusionConfig())

    def test_default_delta_is_one_percent_of_diagonal(self, labeled_pair):
        cfg = FusionConfig()
        assert resolve_delta(labeled_pair, cfg) == pytest.approx(
            0.01 * labeled_pair.aabb().diagonal
        )

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(delta=-0.1)
        with pytest.raises(ValueError):
            FusionConfig(n_views=0)
