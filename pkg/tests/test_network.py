"""Forward execution semantics: purity, softmax, attention gates, zoo nets."""

import numpy as np
import pytest

from medrt.errors import ConfigurationError, DimensionError, ValidationError
from medrt.nn import (LayerSpec, NetworkSpec, SkipLink, Tensor, attention_gate,
                      build, forward, infer_shapes, init_params, mini_unet,
                      run_exit_head, tiny_class_net)


def test_zero_logits_softmax_is_half_half():
    p = build("tiny_class_net", seed=0)
    p.tensors["L9.weight"] = Tensor.f32(np.zeros((2, 32)))
    p.tensors["L9.bias"] = Tensor.f32(np.zeros(2))
    out, _ = forward(p.net, p, Tensor.f32(np.random.default_rng(0).standard_normal((3, 1, 64, 64))))
    np.testing.assert_allclose(out.data, 0.5)


def test_softmax_rows_sum_to_one():
    p = build("tiny_class_net", seed=2)
    x = Tensor.f32(np.random.default_rng(1).standard_normal((4, 1, 64, 64)) * 10)
    out, _ = forward(p.net, p, x)
    np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-6)


def test_f32_f64_agree_on_probabilities():
    p = build("tiny_class_net", seed=3)
    x = Tensor.f32(np.random.default_rng(2).standard_normal((4, 1, 64, 64)))
    out32, _ = forward(p.net, p, x, "f32")
    out64, _ = forward(p.net, p, x, "f64")
    assert np.abs(out32.data - out64.data).max() < 1e-4


def test_forward_is_pure():
    p = build("mini_unet", seed=4)
    x = Tensor.f32(np.random.default_rng(3).standard_normal((1, 1, 64, 64)))
    a, _ = forward(p.net, p, x)
    b, _ = forward(p.net, p, x)
    assert a.data.tobytes() == b.data.tobytes()


def test_unet_output_shape_and_range():
    p = build("mini_unet", seed=5)
    x = Tensor.f32(np.random.default_rng(4).standard_normal((2, 1, 64, 64)))
    out, trace = forward(p.net, p, x)
    assert out.shape == (2, 1, 64, 64)
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0
    assert len(trace.outputs) == len(p.net.layers)


def test_trace_shapes_match_spec_inference():
    p = build("mini_unet", seed=6)
    shapes = infer_shapes(p.net)
    x = Tensor.f32(np.random.default_rng(5).standard_normal((1, 1, 64, 64)))
    _, trace = forward(p.net, p, x)
    for got, want in zip(trace.outputs, shapes):
        assert got.shape[1:] == want


def test_exit_head_probabilities():
    p = build("tiny_class_net", seed=7)
    x = Tensor.f32(np.random.default_rng(6).standard_normal((3, 1, 64, 64)))
    _, trace = forward(p.net, p, x)
    probs = run_exit_head(p.net, p, trace)
    assert probs.shape == (3, 2)
    np.testing.assert_allclose(probs.data.sum(axis=1), 1.0, atol=1e-6)


def _gate_params(ci, cs, cg, rng, b_psi=0.0):
    return {
        "w_skip": rng.standard_normal((ci, cs)).astype(np.float32),
        "w_gate": rng.standard_normal((ci, cg)).astype(np.float32),
        "b_add": rng.standard_normal(ci).astype(np.float32),
        "psi": rng.standard_normal(ci).astype(np.float32),
        "b_psi": np.asarray([b_psi], dtype=np.float32),
    }


def test_saturated_gate_passes_skip_through():
    rng = np.random.default_rng(8)
    s = Tensor.f32(rng.standard_normal((1, 3, 6, 6)))
    g = Tensor.f32(rng.standard_normal((1, 5, 6, 6)))
    p = _gate_params(4, 3, 5, rng, b_psi=1e4)
    out = attention_gate(s, g, p)
    np.testing.assert_allclose(out.data, s.data, atol=1e-6)


def test_closed_gate_outputs_zero():
    rng = np.random.default_rng(9)
    s = Tensor.f32(rng.standard_normal((1, 3, 6, 6)))
    g = Tensor.f32(rng.standard_normal((1, 5, 6, 6)))
    p = _gate_params(4, 3, 5, rng, b_psi=-1e4)
    out = attention_gate(s, g, p)
    np.testing.assert_allclose(out.data, 0.0, atol=1e-6)


def test_gate_matches_scalar_hand_evaluation():
    rng = np.random.default_rng(10)
    s = rng.standard_normal((1, 2, 2, 2)).astype(np.float32)
    g = rng.standard_normal((1, 3, 2, 2)).astype(np.float32)
    p = _gate_params(2, 2, 3, rng, b_psi=0.25)
    got = attention_gate(Tensor(s), Tensor(g), p).data
    for h in range(2):
        for w in range(2):
            u = p["w_skip"] @ s[0, :, h, w] + p["w_gate"] @ g[0, :, h, w] + p["b_add"]
            r = np.maximum(u, 0.0)
            alpha = 1.0 / (1.0 + np.exp(-(p["psi"] @ r + p["b_psi"][0])))
            np.testing.assert_allclose(got[0, :, h, w], s[0, :, h, w] * alpha, rtol=1e-5)


def test_gate_channel_mismatch_raises():
    rng = np.random.default_rng(11)
    s = Tensor.f32(rng.standard_normal((1, 3, 4, 4)))
    g = Tensor.f32(rng.standard_normal((1, 5, 4, 4)))
    p = _gate_params(4, 2, 5, rng)  # projects 2 skip channels, gets 3
    with pytest.raises(DimensionError):
        attention_gate(s, g, p)


def test_attention_unet_reduces_to_plain_when_gates_removed():
    """Same weights, skip modes flipped to concat: outputs match a gate-free
    reference exactly when every gate is saturated open."""
    att = build("mini_unet", seed=12, attention=True)
    plain_net = mini_unet(attention=False)
    plain_tensors = {k: v for k, v in att.tensors.items()
                     if not any(k.endswith(s) for s in (".w_skip", ".w_gate", ".b_add", ".psi", ".b_psi"))}
    plain = init_params(plain_net, model_id="mini_unet", seed=12)
    plain.tensors = plain_tensors
    x = Tensor.f32(np.random.default_rng(13).standard_normal((1, 1, 64, 64)))
    ref, _ = forward(plain_net, plain, x)

    for key in list(att.tensors):
        if key.endswith(".b_psi"):
            att.tensors[key] = Tensor.f32(np.asarray([1e4]))
    gated, _ = forward(att.net, att, x)
    np.testing.assert_allclose(gated.data, ref.data, atol=1e-6)


def test_precision_mismatch_raises():
    p = build("tiny_class_net", seed=14)
    x = Tensor.f32(np.zeros((1, 1, 64, 64)))
    with pytest.raises(ConfigurationError):
        forward(p.net, p, x, "int8")


def test_invalid_graphs_rejected():
    with pytest.raises(ValidationError):
        infer_shapes(NetworkSpec(name="bad", input_shape=(1, 4, 4), layers=(
            LayerSpec(kind="concat"),), skips=()))
    with pytest.raises(ValidationError):
        infer_shapes(NetworkSpec(name="bad", input_shape=(1, 4, 4), layers=(
            LayerSpec(kind="relu"), LayerSpec(kind="concat")),
            skips=(SkipLink(src=1, dst=1, mode="concat"),)))
    with pytest.raises(DimensionError):
        infer_shapes(NetworkSpec(name="bad", input_shape=(3, 4, 4), layers=(
            LayerSpec(kind="conv2d", in_ch=2, out_ch=2, kernel=3),)))
