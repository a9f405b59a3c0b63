"""Finite-difference gradient suite for every layer kind and both zoo nets."""

import numpy as np
import pytest

from gradcheck import network_grad_check
from layer_cases import ALL_KINDS, layer_case

from medrt.errors import UnsupportedError
from medrt.nn import (LayerSpec, NetworkSpec, Tensor, backward, forward,
                      init_params, mini_unet, tiny_class_net)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_layer_gradients(kind):
    rng = np.random.default_rng(abs(hash(kind)) % 10000)
    for i in range(5):
        net, params, x = layer_case(kind, rng)
        network_grad_check(net, params, x, seed=i)


def _f64_params(net, seed):
    p = init_params(net, model_id=net.name, seed=seed)
    p.tensors = {k: Tensor.f64(v.data.astype(np.float64)) for k, v in p.tensors.items()}
    return p


def test_tiny_class_net_gradients():
    net = tiny_class_net(image_size=16)
    rng = np.random.default_rng(100)
    for i in range(3):
        p = _f64_params(net, seed=200 + i)
        x = rng.standard_normal((1, 1, 16, 16))
        network_grad_check(net, p, x, seed=i, sample_coords=12)


def test_mini_unet_gradients():
    net = mini_unet(image_size=16, attention=True)
    rng = np.random.default_rng(101)
    for i in range(3):
        p = _f64_params(net, seed=300 + i)
        x = rng.standard_normal((1, 1, 16, 16))
        network_grad_check(net, p, x, seed=i, sample_coords=10)


def test_dense_input_grad_is_wt_times_output_grad():
    net = NetworkSpec(name="d", input_shape=(2,),
                      layers=(LayerSpec(kind="dense", in_ch=2, out_ch=2),))
    p = init_params(net, model_id="d", seed=0)
    w = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    p.tensors["L0.weight"] = Tensor(w)
    p.tensors["L0.bias"] = Tensor.f32(np.zeros(2))
    x = Tensor.f32(np.array([[5.0, -1.0]]))
    _, trace = forward(net, p, x)
    g = np.array([[1.0, 0.5]], dtype=np.float32)
    _, ig = backward(net, p, trace, Tensor(g))
    np.testing.assert_allclose(ig.data, g @ w)  # == W^T g rowwise


def test_relu_backward_zeroes_negative_preactivations():
    net = NetworkSpec(name="r", input_shape=(1, 2, 2), layers=(LayerSpec(kind="relu"),))
    p = init_params(net, model_id="r", seed=0)
    x = np.array([[[[1.0, -2.0], [-0.5, 3.0]]]], dtype=np.float32)
    _, trace = forward(net, p, Tensor(x))
    g = np.ones_like(x)
    _, ig = backward(net, p, trace, Tensor(g))
    np.testing.assert_array_equal(ig.data, np.array([[[[1.0, 0.0], [0.0, 1.0]]]]))


def test_backward_linearity():
    rng = np.random.default_rng(55)
    net, params, x = layer_case("conv2d", rng)
    _, trace = forward(net, params, Tensor.f64(x), "f64")
    g = rng.standard_normal(trace.outputs[-1].shape)
    pg1, ig1 = backward(net, params, trace, Tensor.f64(g))
    pg2, ig2 = backward(net, params, trace, Tensor.f64(2 * g))
    np.testing.assert_allclose(ig2.data, 2 * ig1.data, rtol=1e-12)
    for k in pg1:
        np.testing.assert_allclose(pg2[k], 2 * pg1[k], rtol=1e-12)


def test_int8_trace_rejected():
    from medrt.compress import quantize_model
    from medrt.nn import build
    p = build("tiny_class_net", seed=1)
    rng = np.random.default_rng(0)
    calib = [rng.standard_normal((1, 1, 64, 64)).astype(np.float32) for _ in range(4)]
    qp = quantize_model(p, calib)
    out, trace = forward(p.net, qp, Tensor.f32(calib[0]), "int8")
    with pytest.raises(UnsupportedError):
        backward(p.net, qp, trace, Tensor.f32(np.ones_like(out.data)))
