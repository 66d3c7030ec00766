"""Layer forward behavior against independent brute-force oracles."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from watchdognn import nn
from watchdognn.errors import ShapeError


def ref_pad_amounts(size, kernel, stride, padding):
    if padding == "valid":
        return (size - kernel) // stride + 1, 0
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2


def ref_conv2d(x, w, b, stride, padding):
    """Direct sliding-window dot product, out-of-bounds treated as zero."""
    n, h, wd, c = x.shape
    kh, kw, _, f = w.shape
    h_out, pad_top = ref_pad_amounts(h, kh, stride, padding)
    w_out, pad_left = ref_pad_amounts(wd, kw, stride, padding)
    y = np.zeros((n, h_out, w_out, f))
    for s in range(n):
        for oi in range(h_out):
            for oj in range(w_out):
                for k in range(f):
                    acc = 0.0
                    for ki in range(kh):
                        for kj in range(kw):
                            ii = oi * stride - pad_top + ki
                            jj = oj * stride - pad_left + kj
                            if 0 <= ii < h and 0 <= jj < wd:
                                acc += float(np.dot(x[s, ii, jj], w[ki, kj, :, k]))
                    y[s, oi, oj, k] = acc + b[k]
    return y


def ref_conv2d_transpose(x, w, b, stride, padding):
    """Direct scatter-add of each input pixel's weighted kernel stamp."""
    n, h, wd, c = x.shape
    kh, kw, f, _ = w.shape
    if padding == "same":
        h_out, w_out = h * stride, wd * stride
    else:
        h_out, w_out = (h - 1) * stride + kh, (wd - 1) * stride + kw
    _, pad_top = ref_pad_amounts(h_out, kh, stride, padding)
    _, pad_left = ref_pad_amounts(w_out, kw, stride, padding)
    y = np.zeros((n, h_out, w_out, f))
    for s in range(n):
        for i in range(h):
            for j in range(wd):
                for ki in range(kh):
                    for kj in range(kw):
                        oi = i * stride - pad_top + ki
                        oj = j * stride - pad_left + kj
                        if 0 <= oi < h_out and 0 <= oj < w_out:
                            y[s, oi, oj] += x[s, i, j] @ w[ki, kj].T
    return y + b


def ref_maxpool(x, pool, stride):
    n, h, w, c = x.shape
    h_out = (h - pool) // stride + 1
    w_out = (w - pool) // stride + 1
    y = np.empty((n, h_out, w_out, c), dtype=x.dtype)
    for oi in range(h_out):
        for oj in range(w_out):
            window = x[:, oi * stride:oi * stride + pool, oj * stride:oj * stride + pool, :]
            y[:, oi, oj, :] = window.max(axis=(1, 2))
    return y


def single_layer(spec, in_shape, seed=0):
    return nn.Network([spec], in_shape, seed=seed)


class TestConv2D:
    def test_identity_kernel_reproduces_image(self):
        net = single_layer(nn.conv2d(1, kernel_size=1, stride=1), (5, 5, 1))
        net.layers[0].params["w"][:] = 1.0
        img = np.random.default_rng(0).random((3, 5, 5, 1), dtype=np.float32)
        assert_allclose(net.forward(img), img, rtol=0, atol=0)

    def test_valid_2x2_diagonal_kernel(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32).reshape(1, 2, 2, 1)
        w = np.array([[1.0, 0.0], [0.0, 1.0]]).reshape(2, 2, 1, 1)
        net = single_layer(nn.conv2d(1, kernel_size=2, stride=1, padding="valid"), (2, 2, 1))
        net.layers[0].params["w"][:] = w
        expected = ref_conv2d(x, w, np.zeros(1), 1, "valid")
        assert expected.shape == (1, 1, 1, 1) and expected[0, 0, 0, 0] == 5.0
        assert_allclose(net.forward(x), expected, atol=1e-6)

    @pytest.mark.parametrize("h,w,c,f,k,stride,padding", [
        (6, 6, 1, 3, 3, 1, "same"),
        (7, 5, 2, 4, 3, 2, "same"),
        (8, 8, 3, 2, 2, 2, "valid"),
        (5, 5, 2, 3, 3, 1, "valid"),
        (9, 9, 1, 2, 4, 3, "same"),
    ])
    def test_matches_sliding_window_oracle(self, h, w, c, f, k, stride, padding):
        rng = np.random.default_rng(42)
        net = single_layer(nn.conv2d(f, kernel_size=k, stride=stride, padding=padding),
                           (h, w, c), seed=7)
        layer = net.layers[0]
        x = rng.standard_normal((2, h, w, c)).astype(np.float32)
        layer.params["b"][:] = rng.standard_normal(f).astype(np.float32)
        got = net.forward(x)
        want = ref_conv2d(x.astype(np.float64), layer.params["w"].astype(np.float64),
                          layer.params["b"].astype(np.float64), stride, padding)
        assert got.shape == want.shape == (2,) + layer.out_shape
        assert_allclose(got, want, atol=1e-5)

    def test_valid_kernel_larger_than_input_rejected(self):
        with pytest.raises(ShapeError, match="layer 0"):
            single_layer(nn.conv2d(1, kernel_size=5, padding="valid"), (3, 3, 1))


class TestTransposedConv2D:
    @pytest.mark.parametrize("h,w,c,f,k,stride,padding", [
        (4, 4, 2, 3, 3, 2, "same"),
        (3, 5, 1, 2, 3, 2, "same"),
        (4, 4, 2, 2, 2, 2, "valid"),
        (5, 5, 3, 1, 3, 1, "same"),
    ])
    def test_matches_scatter_oracle(self, h, w, c, f, k, stride, padding):
        rng = np.random.default_rng(3)
        net = single_layer(nn.conv2d_transpose(f, kernel_size=k, stride=stride,
                                               padding=padding), (h, w, c), seed=11)
        layer = net.layers[0]
        x = rng.standard_normal((2, h, w, c)).astype(np.float32)
        layer.params["b"][:] = rng.standard_normal(f).astype(np.float32)
        got = net.forward(x)
        want = ref_conv2d_transpose(x.astype(np.float64),
                                    layer.params["w"].astype(np.float64),
                                    layer.params["b"].astype(np.float64), stride, padding)
        assert got.shape == want.shape == (2,) + layer.out_shape
        assert_allclose(got, want, atol=1e-5)

    def test_same_stride2_doubles_spatial_dims(self):
        net = single_layer(nn.conv2d_transpose(16, 3, 2, "same"), (7, 7, 32))
        assert net.output_shape == (14, 14, 16)


class TestMaxPool2D:
    @pytest.mark.parametrize("h,w,pool,stride", [(6, 6, 2, 2), (7, 7, 2, 2), (8, 6, 3, 2), (5, 5, 2, 1)])
    def test_matches_window_max_oracle(self, h, w, pool, stride):
        rng = np.random.default_rng(9)
        x = rng.integers(0, 10, size=(2, h, w, 3)).astype(np.float32)  # ties included
        net = single_layer(nn.max_pool2d(pool, stride), (h, w, 3))
        assert_array_equal(net.forward(x), ref_maxpool(x, pool, stride))

    def test_window_larger_than_input_rejected(self):
        with pytest.raises(ShapeError, match="layer 0"):
            single_layer(nn.max_pool2d(4), (3, 3, 1))


class TestActivations:
    def test_softmax_constant_vector_is_uniform(self):
        net = single_layer(nn.softmax(), (10,))
        out = net.forward(np.full((1, 10), 3.5, dtype=np.float32))
        assert_allclose(out, np.full((1, 10), 0.1), atol=1e-7)

    def test_softmax_probability_vector(self):
        rng = np.random.default_rng(4)
        net = single_layer(nn.softmax(), (10,))
        out = net.forward(rng.standard_normal((50, 10)).astype(np.float32) * 10)
        assert np.all(out > 0) and np.all(out < 1)
        assert_allclose(out.sum(axis=-1), 1.0, atol=1e-5)

    def test_relu_and_sigmoid(self):
        x = np.array([[-2.0, 0.0, 3.0]], dtype=np.float32)
        assert_array_equal(single_layer(nn.relu(), (3,)).forward(x), [[0.0, 0.0, 3.0]])
        sig = single_layer(nn.sigmoid(), (3,)).forward(x)
        assert_allclose(sig, 1.0 / (1.0 + np.exp(-x)), atol=1e-7)


class TestDropout:
    def test_inference_is_identity(self):
        net = single_layer(nn.dropout(0.5), (20,))
        x = np.random.default_rng(0).random((4, 20), dtype=np.float32)
        assert_array_equal(net.forward(x, mode="inference"), x)

    def test_train_scales_survivors(self):
        net = single_layer(nn.dropout(0.25), (1000,))
        x = np.ones((2, 1000), dtype=np.float32)
        y = net.forward(x, mode="train", rng=np.random.default_rng(5))
        survivors = y[y != 0]
        assert_allclose(survivors, 1.0 / 0.75, atol=1e-6)
        assert 0.6 < (y != 0).mean() < 0.9

    def test_frozen_mask_is_used(self):
        net = single_layer(nn.dropout(0.5), (4,))
        mask = np.array([[True, False, True, False]])
        net.layers[0].frozen_mask = mask
        y = net.forward(np.ones((1, 4), dtype=np.float32), mode="train")
        assert_allclose(y, [[2.0, 0.0, 2.0, 0.0]])

    def test_rate_one_rejected(self):
        with pytest.raises(ShapeError, match="layer 0"):
            single_layer(nn.dropout(1.0), (4,))


class TestShapesAndConstruction:
    def test_declared_output_shape_matches_forward(self):
        cases = [
            (nn.conv2d(8, 3, 2, "same"), (28, 28, 1)),
            (nn.conv2d(4, 3, 1, "valid"), (10, 12, 2)),
            (nn.conv2d_transpose(4, 3, 2, "same"), (7, 7, 8)),
            (nn.max_pool2d(2), (14, 14, 8)),
            (nn.dense(17), (40,)),
            (nn.flatten(), (4, 5, 2)),
            (nn.reshape((5, 4, 2)), (40,)),
            (nn.dropout(0.3), (9,)),
            (nn.relu(), (3, 3, 3)),
            (nn.sigmoid(), (6,)),
            (nn.softmax(), (10,)),
        ]
        rng = np.random.default_rng(0)
        for spec, in_shape in cases:
            net = single_layer(spec, in_shape)
            x = rng.random((3,) + in_shape, dtype=np.float32)
            out = net.forward(x, mode="train", rng=rng)
            assert out.shape == (3,) + net.output_shape, spec.kind

    def test_dense_requires_flat_input(self):
        with pytest.raises(ShapeError, match=r"layer 1 \(Dense\)"):
            nn.Network([nn.relu(), nn.dense(4)], (3, 3, 1))

    def test_reshape_product_mismatch(self):
        with pytest.raises(ShapeError, match="layer 0"):
            single_layer(nn.reshape((2, 2)), (5,))

    def test_forward_input_shape_mismatch(self):
        net = single_layer(nn.dense(2), (3,))
        with pytest.raises(ShapeError):
            net.forward(np.zeros((1, 4), dtype=np.float32))

    def test_unknown_layer_kind_rejected(self):
        with pytest.raises(ShapeError):
            nn.LayerSpec("Norm", {})


class TestDeterminism:
    def test_same_seed_bit_identical_init(self):
        specs = [nn.conv2d(4, 3, 2), nn.relu(), nn.flatten(), nn.dense(5)]
        a = nn.Network(specs, (8, 8, 1), seed=123)
        b = nn.Network(specs, (8, 8, 1), seed=123)
        assert_array_equal(a.get_flat_params(), b.get_flat_params())
        c = nn.Network(specs, (8, 8, 1), seed=124)
        assert not np.array_equal(a.get_flat_params(), c.get_flat_params())

    def test_inference_deterministic_with_dropout(self):
        net = nn.Network([nn.dense(8), nn.dropout(0.5), nn.dense(3)], (6,), seed=0)
        x = np.random.default_rng(1).random((4, 6), dtype=np.float32)
        assert_array_equal(net.forward(x), net.forward(x))

    def test_forward_backward_values_stay_finite(self):
        net = nn.Network([nn.conv2d(4, 3, 2), nn.relu(), nn.flatten(),
                          nn.dense(10), nn.softmax()], (8, 8, 1), seed=2)
        rng = np.random.default_rng(3)
        x = rng.random((5, 8, 8, 1), dtype=np.float32)
        t = np.eye(10, dtype=np.float32)[rng.integers(0, 10, size=5)]
        out = net.forward(x)
        loss, grads = net.backward(x, t, "categorical_cross_entropy")
        assert np.all(np.isfinite(out)) and np.isfinite(loss)
        assert all(np.all(np.isfinite(g)) for gd in grads for g in gd.values())
