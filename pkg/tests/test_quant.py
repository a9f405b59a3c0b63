"""Calibration, tensor quantization, and int8 kernel semantics."""

import numpy as np
import pytest

from medrt.compress import (calibrate, dequantize, percentile_bounds,
                            quantize_model, quantize_tensor, weight_scheme)
from medrt.errors import ConfigurationError
from medrt.nn import QuantScheme, Tensor, build, forward
from medrt.nn.kernels import qconv2d, qdense


def test_symmetric_range_minmax():
    s = calibrate(np.array([-1.0, -0.25, 0.5, 1.0]), "minmax")
    assert s.scale[0] == pytest.approx(2 / 255)
    assert s.zero_point == 0


def test_constant_samples_stay_representable():
    with pytest.warns(RuntimeWarning):
        s = calibrate(np.full(100, 5.0), "minmax")
    q = quantize_tensor(Tensor.f32(np.array([5.0])), s)
    back = dequantize(q).data[0]
    assert abs(back - 5.0) <= s.scale[0]


def test_all_zero_samples_floor_scale():
    with pytest.warns(RuntimeWarning):
        s = calibrate(np.zeros(10), "minmax")
    assert s.scale[0] == pytest.approx(1e-8)


def test_percentile_matches_sort_oracle():
    rng = np.random.default_rng(42)
    vals = rng.standard_normal(10_000)
    lo, hi = percentile_bounds(vals, 0.1)
    v = np.sort(vals)  # independent full-sort oracle
    lo_want = v[int(np.ceil(round(0.001 * 10_000, 6))) - 1]
    hi_want = v[int(np.ceil(round(0.999 * 10_000, 6))) - 1]
    assert lo == lo_want and hi == hi_want
    s = calibrate(vals, "percentile(0.1)")
    assert s.scale[0] == pytest.approx((hi_want - lo_want) / 255)


def test_quantize_direct_formula():
    s = QuantScheme.per_tensor(0.1, 0)
    q = quantize_tensor(Tensor.f32(np.array([1.0])), s)
    assert q.data[0] == 10


def test_quantize_saturates():
    s = QuantScheme.per_tensor(0.1, 0)
    q = quantize_tensor(Tensor.f32(np.array([100.0, -100.0])), s)
    assert q.data[0] == 127 and q.data[1] == -128


def test_round_trip_error_bound():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, 1000).astype(np.float32)
    s = calibrate(np.array([-1.0, 1.0]), "minmax")
    back = dequantize(quantize_tensor(Tensor(x), s)).data
    assert np.abs(x - back).max() <= s.scale[0] / 2 + 1e-9


def test_weight_round_trip_bound_per_channel():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((6, 3, 3, 3)).astype(np.float32)
    s = weight_scheme(w)
    back = dequantize(quantize_tensor(Tensor(w), s)).data
    per_ch_bound = np.asarray(s.scale)[:, None, None, None] / 2 + 1e-9
    assert (np.abs(w - back) <= per_ch_bound).all()


def _np_int32_qconv(qx, zx, qw, offset, mult, zy, stride, pad):
    """Pure-numpy int32-accumulation oracle for the numba kernel."""
    n, cin, h, w = qx.shape
    cout, _, kh, kw = qw.shape
    qxp = np.full((n, cin, h + 2 * pad, w + 2 * pad), zx, dtype=np.int32)
    qxp[:, :, pad:pad + h, pad:pad + w] = qx
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.empty((n, cout, ho, wo), dtype=np.int8)
    for b in range(n):
        for co in range(cout):
            for y in range(ho):
                for x in range(wo):
                    win = qxp[b, :, y * stride:y * stride + kh, x * stride:x * stride + kw]
                    acc = int((win * qw[co].astype(np.int32)).sum()) + int(offset[co])
                    v = int(np.rint(mult[co] * acc)) + zy
                    out[b, co, y, x] = max(-128, min(127, v))
    return out


def test_int8_conv_kernel_matches_int32_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        h = int(rng.integers(4, 8))
        qx = rng.integers(-128, 128, (2, cin, h, h)).astype(np.int8)
        qw = rng.integers(-127, 128, (cout, cin, 3, 3)).astype(np.int8)
        offset = rng.integers(-5000, 5000, cout).astype(np.int32)
        mult = rng.uniform(1e-4, 0.05, cout)
        zx, zy = int(rng.integers(-20, 20)), int(rng.integers(-20, 20))
        got = qconv2d(qx, zx, qw, offset, mult, zy, 1, 1)
        want = _np_int32_qconv(qx, zx, qw, offset, mult, zy, 1, 1)
        np.testing.assert_array_equal(got, want)


def test_int8_dense_kernel_matches_oracle():
    rng = np.random.default_rng(10)
    qx = rng.integers(-128, 128, (3, 7)).astype(np.int8)
    qw = rng.integers(-127, 128, (4, 7)).astype(np.int8)
    offset = rng.integers(-1000, 1000, 4).astype(np.int32)
    mult = rng.uniform(1e-4, 0.05, 4)
    got = qdense(qx, qw, offset, mult, 3)
    acc = qx.astype(np.int32) @ qw.astype(np.int32).T + offset[None, :]
    want = np.clip(np.rint(mult[None, :] * acc) + 3, -128, 127).astype(np.int8)
    np.testing.assert_array_equal(got, want)


def test_single_conv_int8_close_to_f32():
    """Near-identity conv: int8 output within 2 * scale_out of f32."""
    from medrt.nn import LayerSpec, NetworkSpec, init_params
    net = NetworkSpec(name="one", input_shape=(2, 8, 8), layers=(
        LayerSpec(kind="conv2d", in_ch=2, out_ch=2, kernel=3, stride=1, pad=1),))
    p = init_params(net, model_id="one", seed=3)
    w = np.zeros((2, 2, 3, 3), dtype=np.float32)
    w[0, 0, 1, 1] = 1.0
    w[1, 1, 1, 1] = 1.0
    p.tensors["L0.weight"] = Tensor(w)
    p.tensors["L0.bias"] = Tensor.f32(np.zeros(2))
    rng = np.random.default_rng(4)
    calib = [rng.uniform(-1, 1, (1, 2, 8, 8)).astype(np.float32) for _ in range(8)]
    qp = quantize_model(p, calib)
    x = calib[0]
    f32_out, _ = forward(net, p, Tensor.f32(x), "f32")
    i8_out, _ = forward(net, qp, Tensor.f32(x), "int8")
    scale_out = qp.act_schemes[0].scale[0]
    assert np.abs(f32_out.data - i8_out.data).max() <= 2 * scale_out


def test_quantized_payload_under_30_percent():
    p = build("tiny_class_net", seed=5)
    rng = np.random.default_rng(6)
    calib = [rng.standard_normal((1, 1, 64, 64)).astype(np.float32) for _ in range(4)]
    qp = quantize_model(p, calib)
    assert qp.param_bytes() <= 0.30 * p.param_bytes()


def test_quantize_model_probability_agreement():
    p = build("tiny_class_net", seed=7)
    rng = np.random.default_rng(8)
    calib = [rng.standard_normal((1, 1, 64, 64)).astype(np.float32) for _ in range(16)]
    qp = quantize_model(p, calib)
    assert qp.version == p.version + 1
    x = Tensor.f32(rng.standard_normal((4, 1, 64, 64)))
    f32_out, _ = forward(p.net, p, x, "f32")
    i8_out, _ = forward(p.net, qp, x, "int8")
    assert np.abs(f32_out.data - i8_out.data).max() < 0.15


def test_unet_quantizes_with_fallbacks():
    p = build("mini_unet", seed=9)
    rng = np.random.default_rng(10)
    calib = [rng.standard_normal((1, 1, 64, 64)).astype(np.float32) for _ in range(4)]
    qp = quantize_model(p, calib)
    assert 9 in qp.fallback_layers and 13 in qp.fallback_layers  # junctions
    assert 17 in qp.fallback_layers  # sigmoid head
    x = Tensor.f32(rng.standard_normal((1, 1, 64, 64)))
    f32_out, _ = forward(p.net, p, x, "f32")
    i8_out, _ = forward(p.net, qp, x, "int8")
    assert i8_out.shape == f32_out.shape
    assert np.abs(f32_out.data - i8_out.data).max() < 0.2


def test_empty_calibration_rejected():
    p = build("tiny_class_net", seed=11)
    with pytest.raises(ConfigurationError):
        quantize_model(p, [])
