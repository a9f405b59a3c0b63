"""Structured/unstructured pruning semantics."""

import numpy as np
import pytest

from medrt.compress import estimate_cost, prune_structured, prune_unstructured
from medrt.errors import ValidationError
from medrt.nn import Tensor, build, forward


def test_fraction_zero_is_noop_with_version_bump():
    p = build("tiny_class_net", seed=1)
    net2, p2, plan = prune_structured(p.net, p, 0.0)
    assert net2 == p.net
    assert p2.version == p.version + 1
    assert p2.equals(p)
    assert plan.removed == {}
    assert plan.fraction_achieved == 0.0


def test_l1_ranking_removes_weakest_channel():
    from medrt.nn import LayerSpec, NetworkSpec, init_params
    net = NetworkSpec(name="two", input_shape=(1, 4, 4), layers=(
        LayerSpec(kind="conv2d", in_ch=1, out_ch=2, kernel=3, stride=1, pad=1),))
    p = init_params(net, model_id="two", seed=2)
    w = np.zeros((2, 1, 3, 3), dtype=np.float32)
    w[0] = 0.1 / 9
    w[1] = 9.0 / 9
    p.tensors["L0.weight"] = Tensor(w)
    _, _, plan = prune_structured(net, p, 0.5)
    assert plan.removed == {0: (0,)}


def test_pruned_equals_zeroed_channels_on_zoo_nets():
    rng = np.random.default_rng(3)
    for name in ("tiny_class_net", "mini_unet"):
        p = build(name, seed=4)
        net2, p2, plan = prune_structured(p.net, p, 0.5)
        x = Tensor.f32(rng.standard_normal((1, 1, 64, 64)))
        pruned_out, _ = forward(net2, p2, x)

        zeroed = build(name, seed=4)
        for idx, gone in plan.removed.items():
            w = zeroed.tensors[f"L{idx}.weight"].data.copy()
            b = zeroed.tensors[f"L{idx}.bias"].data.copy()
            w[list(gone)] = 0.0
            b[list(gone)] = 0.0
            zeroed.tensors[f"L{idx}.weight"] = Tensor(w)
            zeroed.tensors[f"L{idx}.bias"] = Tensor(b)
        zeroed_out, _ = forward(zeroed.net, zeroed, x)
        np.testing.assert_allclose(pruned_out.data, zeroed_out.data, atol=1e-5)


def test_prune_plan_reproducible():
    p = build("tiny_class_net", seed=5)
    _, _, plan1 = prune_structured(p.net, p, 0.5)
    _, _, plan2 = prune_structured(p.net, p, 0.5)
    assert plan1 == plan2


def test_prune_halves_macs_on_tiny():
    p = build("tiny_class_net", seed=6)
    base = estimate_cost(p.net, "f32", "edge")
    net2, _, _ = prune_structured(p.net, p, 0.5)
    pruned = estimate_cost(net2, "f32", "edge")
    assert pruned.total_macs <= 0.55 * base.total_macs


def test_exit_head_rebuilt_after_prune():
    from medrt.nn import run_exit_head
    p = build("tiny_class_net", seed=7)
    net2, p2, _ = prune_structured(p.net, p, 0.5)
    x = Tensor.f32(np.random.default_rng(8).standard_normal((1, 1, 64, 64)))
    _, trace = forward(net2, p2, x)
    probs = run_exit_head(net2, p2, trace)
    assert probs.shape == (1, 2)
    np.testing.assert_allclose(probs.data.sum(axis=1), 1.0, atol=1e-6)


def test_fraction_bounds():
    p = build("tiny_class_net", seed=9)
    with pytest.raises(ValidationError):
        prune_structured(p.net, p, 1.0)
    with pytest.raises(ValidationError):
        prune_structured(p.net, p, -0.1)


def test_single_channel_layer_survives_pruning():
    from medrt.nn import LayerSpec, NetworkSpec, init_params
    net = NetworkSpec(name="one", input_shape=(1, 4, 4), layers=(
        LayerSpec(kind="conv2d", in_ch=1, out_ch=1, kernel=3, stride=1, pad=1),))
    p = init_params(net, model_id="one", seed=10)
    net2, p2, plan = prune_structured(net, p, 0.999)  # floor(0.999*1)=0: keeps it
    assert net2.layers[0].out_ch == 1
    assert plan.removed == {}
    # the unet mask head (1x1 conv to a single channel) stays intact too
    u = build("mini_unet", seed=11)
    net3, _, plan3 = prune_structured(u.net, u, 0.5)
    assert net3.layers[16].out_ch == 1
    assert 16 not in plan3.removed


def test_unstructured_hand_case():
    from medrt.nn import LayerSpec, NetworkSpec, init_params
    net = NetworkSpec(name="d", input_shape=(4,), layers=(
        LayerSpec(kind="dense", in_ch=4, out_ch=1),))
    p = init_params(net, model_id="d", seed=12)
    p.tensors["L0.weight"] = Tensor.f32(np.array([[-3.0, 1.0, -0.5, 2.0]]))
    p2, report = prune_unstructured(p, 0.5)
    np.testing.assert_array_equal(p2.tensors["L0.weight"].data,
                                  np.array([[-3.0, 0.0, 0.0, 2.0]], dtype=np.float32))
    assert report.sparsity_achieved == 0.5
    assert "latency" in report.note


def test_unstructured_sparsity_counting():
    p = build("tiny_class_net", seed=13)
    total = sum(t.data.size for k, t in p.tensors.items() if k.endswith(".weight"))
    for target in (0.0, 0.3, 0.77):
        p2, report = prune_unstructured(p, target)
        zeros = sum(int((t.data == 0).sum()) for k, t in p2.tensors.items()
                    if k.endswith(".weight"))
        assert zeros >= report.zeroed
        assert abs(report.sparsity_achieved - target) <= 1.0 / total + 1e-12
    assert prune_unstructured(p, 0.0)[0].equals(p)
