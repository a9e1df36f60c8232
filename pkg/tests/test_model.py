from collections import Counter

import numpy as np
import pytest

from lapepi.errors import ShapeError
from lapepi.lightfield import Epi
from lapepi.net import backward, backward_batch, forward, forward_batch, layer_specs, output_shape
from lapepi.pyramid import PyramidConfig, build_lapepi
from lapepi.train import init_params

from _gradcheck import check_network_gradients

TABLE_PARAM_COUNT = 252033


def small_params(seed=0):
    return init_params(seed, scheme="scaled", n_features=4, n_shrink=3, n_mapping=2)


def random_pyramid(n_a=5, width=12, seed=0):
    return build_lapepi(Epi(np.random.default_rng(seed).random((n_a, width))))


def loss_and_grads(params, pyr, proj):
    out, cache = forward_batch(pyr.levels(), params)
    return float(np.sum(out[0] * proj)), backward_batch(proj[None], cache)


class TestArchitecture:
    def test_layer_inventory(self):
        kinds = Counter(s.name.rstrip("0123456789") for s in layer_specs())
        assert kinds == {"conv_fe": 3, "deconv_s": 2, "conv_pe": 2, "conv_s": 1, "conv_m": 4, "conv_e": 1,
                         "deconv_a": 1}

    def test_parameter_count(self):
        # hand sum of k_a k_w in out + out (+ out PReLU slopes) over the layer table
        assert sum(s.n_params for s in layer_specs()) == TABLE_PARAM_COUNT
        assert init_params(0).n_params() == TABLE_PARAM_COUNT

    def test_spec_details(self):
        specs = {s.name: s for s in layer_specs()}
        assert specs["deconv_s1"].stride == (1, 4)
        assert specs["deconv_s2"].stride == (1, 2)
        assert specs["conv_pe2"].kernel == (1, 5)
        assert specs["conv_pe3"].kernel == (1, 13)
        assert specs["conv_s"].in_ch == 168
        assert specs["deconv_a"].stride == (3, 1)
        assert not specs["deconv_a"].has_prelu
        assert specs["conv_fe1"].in_ch == 1 and specs["conv_fe2"].in_ch == 2


class TestForward:
    def test_patch_geometry(self):
        out = forward(build_lapepi(Epi(np.zeros((11, 44)))), init_params(0))
        assert out.shape == (31, 44)

    @pytest.mark.parametrize("n_a, alpha", [(2, 2), (3, 3), (4, 4), (3, 8)])
    def test_shape_law(self, n_a, alpha):
        params = small_params()
        out, _ = forward_batch(random_pyramid(n_a, 16).levels(), params, alpha)
        assert out.shape == (1,) + output_shape(n_a, 16, alpha)
        assert out.shape[1] == alpha * (n_a - 1) + 1

    def test_bias_only_network(self):
        params = init_params(0)
        for layer in params.layers.values():
            layer["weight"][:] = 0.0
            layer["bias"][:] = 0.3
        out = forward(random_pyramid(), params)
        # zero weights leave only deconv_a's bias at the output
        np.testing.assert_array_equal(out.data, np.full((13, 12), 0.3))

    def test_config_mismatch(self):
        pyr = build_lapepi(np.zeros((3, 16)), PyramidConfig(3, 2, (5, 7)))
        with pytest.raises(ShapeError):
            forward(pyr, small_params())

    def test_batch_equals_single(self):
        params = small_params(3)
        pyrs = [random_pyramid(seed=s) for s in range(3)]
        levels = [np.stack([p.levels()[i] for p in pyrs]) for i in range(3)]
        batched, _ = forward_batch(levels, params)
        for k, p in enumerate(pyrs):
            np.testing.assert_allclose(batched[k], forward(p, params).data, atol=1e-13)

    def test_deterministic(self):
        a = forward(random_pyramid(), init_params(4)).data
        b = forward(random_pyramid(), init_params(4)).data
        np.testing.assert_array_equal(a, b)


class TestBackward:
    def test_every_parameter_matches_finite_differences(self):
        params = small_params(1)
        levels = random_pyramid(seed=2).levels()
        proj = np.random.default_rng(3).normal(size=(1, 13, 12))
        worst, used, skipped = check_network_gradients(params, levels, proj)
        assert worst < 1e-4
        assert used >= 0.9 * params.n_params()
        assert used + skipped == params.n_params()

    def test_input_gradients(self):
        params = small_params(5)
        pyr = random_pyramid(seed=6)
        proj = np.random.default_rng(7).normal(size=(13, 12))
        _, level_grads = backward(pyr, params, proj)
        levels = pyr.levels()
        h = 1e-5
        for lv, g in zip(levels, level_grads):
            assert lv.shape == g.shape
            for idx in [(0, 0), (2, 1), (4, lv.shape[1] - 1)]:
                full = idx + ((1,) if lv.ndim == 3 else ())
                old = lv[full]
                lv[full] = old + h
                fp = np.sum(forward_batch(levels, params)[0][0] * proj)
                lv[full] = old - h
                fm = np.sum(forward_batch(levels, params)[0][0] * proj)
                lv[full] = old
                num = (fp - fm) / (2 * h)
                assert num == pytest.approx(g[full], rel=1e-5, abs=1e-9)

    def test_zero_and_linear_in_grad_output(self):
        params = small_params(8)
        pyr = random_pyramid(seed=9)
        proj = np.random.default_rng(10).normal(size=(13, 12))
        g0, _ = backward(pyr, params, np.zeros((13, 12)))
        g1, _ = backward(pyr, params, proj)
        g2, _ = backward(pyr, params, 2 * proj)
        for name in g0:
            for key in g0[name]:
                assert not np.any(g0[name][key])
                np.testing.assert_allclose(g2[name][key], 2 * g1[name][key], rtol=1e-12, atol=1e-15)

    def test_missing_cache(self):
        with pytest.raises(ValueError):
            backward_batch(np.zeros((1, 3, 4)), None)
