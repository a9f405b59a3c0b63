"""Single-layer network builders for the finite-difference gradient suite."""

import numpy as np

from medrt.nn import LayerSpec, NetworkSpec, SkipLink, Tensor, init_params

GUARD = 1e-3  # keep samples away from relu/maxpool kinks


def safe_normal(rng, shape, guard=GUARD):
    x = rng.standard_normal(shape)
    small = np.abs(x) < guard
    x[small] = np.sign(x[small] + 0.5) * (guard + np.abs(x[small]))
    return x


def pool_safe(rng, shape, guard=GUARD):
    """Samples whose 2x2 pooling windows have pairwise gaps > guard."""
    n, c, h, w = shape
    x = safe_normal(rng, shape)
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2)
    flat = blocks.reshape(-1, 4)
    for row in flat:
        while True:
            order = np.sort(row)
            if np.min(np.diff(order)) > guard:
                break
            row[:] = safe_normal(rng, (4,))
    return flat.reshape(blocks.shape).reshape(shape)


def _net(input_shape, layers, skips=()):
    return NetworkSpec(name="probe", input_shape=input_shape,
                       layers=tuple(layers), skips=tuple(skips))


def layer_case(kind: str, rng: np.random.Generator):
    """Returns (net, input array) for a gradient probe of one layer kind."""
    if kind == "conv2d":
        stride = int(rng.integers(1, 3))
        h = 6 if stride == 1 else 7
        net = _net((2, h, h), [LayerSpec(kind="conv2d", in_ch=2, out_ch=3,
                                         kernel=3, stride=stride, pad=1)])
        x = rng.standard_normal((1, 2, h, h))
    elif kind == "conv1x1":
        net = _net((2, 5, 5), [LayerSpec(kind="conv1x1", in_ch=2, out_ch=3)])
        x = rng.standard_normal((1, 2, 5, 5))
    elif kind == "relu":
        net = _net((3, 4, 4), [LayerSpec(kind="relu")])
        x = safe_normal(rng, (1, 3, 4, 4))
    elif kind == "maxpool2":
        net = _net((2, 4, 4), [LayerSpec(kind="maxpool2")])
        x = pool_safe(rng, (1, 2, 4, 4))
    elif kind == "upsample2_nearest":
        net = _net((2, 3, 3), [LayerSpec(kind="upsample2_nearest")])
        x = rng.standard_normal((1, 2, 3, 3))
    elif kind == "global_avg_pool":
        net = _net((3, 4, 4), [LayerSpec(kind="global_avg_pool")])
        x = rng.standard_normal((1, 3, 4, 4))
    elif kind == "dense":
        net = _net((5,), [LayerSpec(kind="dense", in_ch=5, out_ch=3)])
        x = rng.standard_normal((2, 5))
    elif kind == "softmax":
        net = _net((4,), [LayerSpec(kind="softmax")])
        x = rng.standard_normal((2, 4))
    elif kind == "sigmoid":
        net = _net((2, 4, 4), [LayerSpec(kind="sigmoid")])
        x = rng.standard_normal((1, 2, 4, 4))
    elif kind == "concat":
        net = _net((2, 4, 4), [
            LayerSpec(kind="relu"),
            LayerSpec(kind="conv1x1", in_ch=2, out_ch=3),
            LayerSpec(kind="concat"),
        ], [SkipLink(src=0, dst=2, mode="concat")])
        x = safe_normal(rng, (1, 2, 4, 4))
    elif kind == "attention_gate":
        net = _net((2, 4, 4), [
            LayerSpec(kind="relu"),
            LayerSpec(kind="conv1x1", in_ch=2, out_ch=3),
            LayerSpec(kind="attention_gate", inter_ch=4),
        ], [SkipLink(src=0, dst=2, mode="attention-gated")])
        x = safe_normal(rng, (1, 2, 4, 4))
    elif kind == "concat_gated":
        net = _net((2, 4, 4), [
            LayerSpec(kind="relu"),
            LayerSpec(kind="conv1x1", in_ch=2, out_ch=3),
            LayerSpec(kind="concat", inter_ch=4),
        ], [SkipLink(src=0, dst=2, mode="attention-gated")])
        x = safe_normal(rng, (1, 2, 4, 4))
    else:
        raise ValueError(kind)
    params = init_params(net, model_id=f"probe_{kind}", seed=int(rng.integers(0, 2**31)))
    params.tensors = {k: Tensor.f64(v.data.astype(np.float64))
                      for k, v in params.tensors.items()}
    return net, params, x


ALL_KINDS = ["conv2d", "conv1x1", "relu", "maxpool2", "upsample2_nearest",
             "global_avg_pool", "dense", "softmax", "sigmoid", "concat",
             "attention_gate", "concat_gated"]
