"""Convolution reference-kernel oracle tests."""

import numpy as np
import pytest

from medrt.errors import DimensionError, GeometryError
from medrt.nn import Tensor, conv2d_ref
from medrt.nn.kernels import conv2d


def sliding_window_conv(x, w, b, stride, pad):
    """Independent brute-force oracle: explicit window sums, no im2col."""
    n, cin, h, ww = x.shape
    cout, _, kh, kw = w.shape
    xp = np.zeros((n, cin, h + 2 * pad, ww + 2 * pad), dtype=np.float64)
    xp[:, :, pad:pad + h, pad:pad + ww] = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (ww + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for bi in range(n):
        for co in range(cout):
            for y in range(ho):
                for xo in range(wo):
                    acc = 0.0
                    for ci in range(cin):
                        for dy in range(kh):
                            for dx in range(kw):
                                acc += xp[bi, ci, y * stride + dy, xo * stride + dx] * w[co, ci, dy, dx]
                    out[bi, co, y, xo] = acc + b[co]
    return out


def test_all_ones_2x2():
    x = Tensor.f32(np.ones((1, 1, 2, 2)))
    k = Tensor.f32(np.ones((1, 1, 2, 2)))
    out = conv2d_ref(x, k, [0.0], stride=1, pad=0)
    assert out.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 4.0


def test_identity_kernel():
    rng = np.random.default_rng(3)
    x = Tensor.f32(rng.standard_normal((2, 1, 5, 7)))
    k = Tensor.f32(np.ones((1, 1, 1, 1)))
    out = conv2d_ref(x, k, [0.0])
    np.testing.assert_array_equal(out.data, x.data)


def test_random_case_matches_sliding_window_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
    w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
    b = rng.standard_normal(3).astype(np.float32)
    got = conv2d_ref(Tensor(x), Tensor(w), b, stride=1, pad=1)
    want = sliding_window_conv(x.astype(np.float64), w.astype(np.float64),
                               b.astype(np.float64), 1, 1)
    np.testing.assert_allclose(got.data, want, atol=1e-5)


def test_optimized_conv_matches_ref_on_200_random_shapes():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 3))
        cin = int(rng.integers(1, 5))
        cout = int(rng.integers(1, 5))
        k = int(rng.choice([1, 3, 5]))
        stride = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 3))
        h = int(rng.integers(k, k + 6))
        w = int(rng.integers(k, k + 6))
        span_h = h + 2 * pad - k
        span_w = w + 2 * pad - k
        if span_h % stride or span_w % stride:
            continue
        x = rng.standard_normal((n, cin, h, w)).astype(np.float32)
        wts = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
        b = rng.standard_normal(cout).astype(np.float32)
        fast = conv2d(x, wts, b, stride, pad)
        ref = conv2d_ref(Tensor(x), Tensor(wts), b, stride, pad)
        np.testing.assert_allclose(fast, ref.data, atol=1e-5)


def test_shape_mismatch_raises():
    x = Tensor.f32(np.ones((1, 2, 4, 4)))
    k = Tensor.f32(np.ones((1, 3, 3, 3)))
    with pytest.raises(DimensionError):
        conv2d_ref(x, k, [0.0])


def test_non_integral_geometry_raises():
    x = Tensor.f32(np.ones((1, 1, 5, 5)))
    k = Tensor.f32(np.ones((1, 1, 2, 2)))
    with pytest.raises(GeometryError):
        conv2d_ref(x, k, [0.0], stride=2, pad=0)
