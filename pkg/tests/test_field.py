import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifield.errors import NonUnitDirection, ShapeMismatch
from bifield.features import FeatureGrid, build_feature_grid, sample_feature, sample_features
from bifield.field import (
    FieldQuery,
    Fusion,
    backward,
    embed_dim,
    eval_field,
    init_mlp_params,
    intersection_value,
    load_params,
    positional_embed,
    save_params,
    union_value,
)


class TestFeatureSampling:
    @pytest.fixture()
    def grid(self, rng):
        return FeatureGrid(data=rng.normal(size=(2, 6, 5, 3)).astype(np.float32))

    def test_on_node(self, grid):
        got = sample_feature(grid, 0, (2.0, 3.0))
        assert np.allclose(got, grid.data[0, 3, 2].astype(np.float64))

    def test_midpoint_mean(self, grid):
        got = sample_feature(grid, 1, (2.5, 3.0))
        want = 0.5 * (grid.data[1, 3, 2] + grid.data[1, 3, 3]).astype(np.float64)
        assert np.allclose(got, want)

    def test_constant_grid_everywhere(self):
        grid = FeatureGrid(data=np.full((1, 4, 4, 2), 7.0, dtype=np.float32))
        pix = np.array([[0.2, 0.7], [3.9, 0.0], [-5.0, 99.0]])
        assert np.allclose(sample_features(grid, 0, pix), 7.0)

    def test_clamp_semantics(self, grid):
        inside_corner = sample_feature(grid, 0, (0.0, 0.0))
        way_out = sample_feature(grid, 0, (-100.0, -100.0))
        assert np.allclose(inside_corner, way_out)

    def test_pyramid_shapes_and_mean_preservation(self, rng):
        img = rng.uniform(size=(16, 16))
        grid = build_feature_grid([img, img], n_levels=3)
        assert grid.data.shape == (2, 16, 16, 3)
        assert np.allclose(grid.data[0, :, :, 0], img.astype(np.float32))


class TestPositionalEmbed:
    def test_hand_evaluated_example(self):
        e = positional_embed((1.0, 0.0, 0.0), 1)
        assert np.allclose(e, [0.0, 0.0, 0.0, -1.0, 1.0, 1.0], atol=1e-15)

    def test_zero_frequencies(self):
        assert positional_embed((0.0, 1.0, 0.0), 0).shape == (0,)

    @given(st.integers(min_value=0, max_value=8))
    def test_length_contract(self, n_freq):
        d = np.array([0.0, 0.6, 0.8])
        assert positional_embed(d, n_freq).shape == (embed_dim(n_freq),)

    def test_rejects_non_unit(self):
        with pytest.raises(NonUnitDirection):
            positional_embed((1.0, 1.0, 0.0), 2)


class TestEvalField:
    def test_zero_params_half(self):
        p = init_mlp_params(5, hidden=8, depth=2, seed=0).zeros_like()
        s_h, s_o = eval_field(p, np.zeros((4, 5)))
        assert np.all(s_h == 0.5) and np.all(s_o == 0.5)

    def test_outputs_in_open_interval(self, rng):
        p = init_mlp_params(6, hidden=16, depth=3, seed=1)
        s_h, s_o = eval_field(p, rng.normal(size=(50, 6)) * 3)
        assert np.all((s_h > 0) & (s_h < 1) & (s_o > 0) & (s_o < 1))

    def test_duplicated_views_equal_single(self, rng):
        feats = rng.normal(size=(1, 7, 4))
        deps = rng.normal(size=(1, 7))
        emb = rng.normal(size=(1, 7, 6))
        q1 = FieldQuery(points=np.zeros((7, 3)), features=feats, depths=deps, embeds=emb)
        q3 = FieldQuery(
            points=np.zeros((7, 3)),
            features=np.repeat(feats, 3, 0),
            depths=np.repeat(deps, 3, 0),
            embeds=np.repeat(emb, 3, 0),
        )
        p = init_mlp_params(11, hidden=16, depth=2, seed=2)
        a = eval_field(p, q1, Fusion.MEAN)
        b = eval_field(p, q3, Fusion.MEAN)
        assert np.allclose(a[0], b[0], atol=1e-15) and np.allclose(a[1], b[1], atol=1e-15)

    def test_pure_function_bitwise(self, rng):
        p = init_mlp_params(4, hidden=8, depth=2, seed=3)
        x = rng.normal(size=(10, 4))
        a = eval_field(p, x)
        b = eval_field(p, x)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_dim_mismatch(self, rng):
        p = init_mlp_params(4, hidden=8, depth=2, seed=3)
        with pytest.raises(ShapeMismatch):
            eval_field(p, rng.normal(size=(5, 7)))


class TestBackward:
    def test_zero_upstream_zero_grads(self, rng):
        p = init_mlp_params(4, hidden=8, depth=2, seed=4)
        (s_h, s_o), cache = eval_field(p, rng.normal(size=(6, 4)), return_cache=True)
        g = backward(p, cache, np.zeros(6), np.zeros(6))
        assert all(np.all(a == 0.0) for a in g.arrays())

    def test_single_linear_layer_outer_product(self, rng):
        # depth-0 trunk: heads act directly on the input
        p = init_mlp_params(3, hidden=3, depth=0, seed=0)
        p.head_w[0][:] = 0.0
        p.head_b[0][:] = 0.0
        x = rng.normal(size=(5, 3))
        (s_h, _), cache = eval_field(p, x, return_cache=True)
        gh = rng.normal(size=5)
        g = backward(p, cache, gh, np.zeros(5))
        # with zero weights, s_h = 0.5 and sigmoid' = 0.25: dW = 0.25 * x^T gh
        want = 0.25 * x.T @ gh[:, None]
        assert np.allclose(g.head_w[0], want, atol=1e-12)

    def test_finite_difference_oracle(self, rng):
        max_rel = 0.0
        for seed in range(3):
            p = init_mlp_params(6, hidden=12, depth=3, seed=seed)
            for b in p.trunk_b:
                b[:] = rng.normal(scale=0.3, size=b.shape)
            x = rng.normal(size=(9, 6))
            gh = rng.normal(size=9)
            go = rng.normal(size=9)
            (_, _), cache = eval_field(p, x, return_cache=True)
            g = backward(p, cache, gh, go)
            for arr, grad in zip(p.arrays(), g.arrays()):
                flat = arr.reshape(-1)
                gflat = grad.reshape(-1)
                for i in rng.choice(flat.size, size=min(4, flat.size), replace=False):
                    old = flat[i]
                    h = 1e-4
                    flat[i] = old + h
                    f1 = float(gh @ eval_field(p, x)[0] + go @ eval_field(p, x)[1])
                    flat[i] = old - h
                    f2 = float(gh @ eval_field(p, x)[0] + go @ eval_field(p, x)[1])
                    flat[i] = old
                    fd = (f1 - f2) / (2 * h)
                    rel = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-8)
                    max_rel = max(max_rel, rel)
        assert max_rel <= 1e-4

    def test_shape_mismatch(self, rng):
        p = init_mlp_params(4, hidden=8, depth=2, seed=4)
        (_, _), cache = eval_field(p, rng.normal(size=(6, 4)), return_cache=True)
        with pytest.raises(ShapeMismatch):
            backward(p, cache, np.zeros(5), np.zeros(6))


class TestFieldAlgebra:
    def test_hand_values(self):
        assert union_value(0.9, 0.3) == 0.9
        assert intersection_value(0.9, 0.3) == pytest.approx(0.27)
        assert union_value(1.0, 1.0) == 1.0
        assert intersection_value(1.0, 1.0) == 1.0
        assert intersection_value(0.0, 0.7) == 0.0

    @settings(max_examples=200)
    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_bounds(self, a, b):
        u = union_value(a, b)
        i = intersection_value(a, b)
        assert u >= max(a, b)
        assert i <= min(a, b)
        assert 0.0 <= i <= u <= 1.0

    @given(
        st.floats(min_value=0.0, max_value=1.0).filter(lambda v: abs(v - 0.5) > 1e-9),
        st.floats(min_value=0.0, max_value=1.0).filter(lambda v: abs(v - 0.5) > 1e-9),
    )
    def test_threshold_semantics(self, a, b):
        assert (union_value(a, b) > 0.5) == ((a > 0.5) or (b > 0.5))


def test_params_io_roundtrip(tmp_path, rng):
    p = init_mlp_params(7, hidden=10, depth=3, seed=9)
    for b in p.trunk_b:
        b[:] = rng.normal(size=b.shape)
    save_params(tmp_path / "params", p)
    back = load_params(tmp_path / "params")
    for a, b in zip(p.arrays(), back.arrays()):
        assert np.array_equal(a, b)
