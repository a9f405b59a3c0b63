"""Layer-graph description and the forward/backward execution engine.

A network is an ordered layer list; each layer consumes the previous layer's
output. Skip links feed an earlier layer's output into a `concat` or
`attention_gate` junction, either raw (mode "concat") or gated by additive
attention (mode "attention-gated", gating signal = the junction's primary
input).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from medrt.errors import (ConfigurationError, DimensionError, UnsupportedError,
                          ValidationError)
from medrt.nn import kernels
from medrt.nn.tensor import QuantScheme, Tensor

LAYER_KINDS = ("conv2d", "conv1x1", "relu", "maxpool2", "upsample2_nearest",
               "global_avg_pool", "dense", "softmax", "sigmoid", "concat",
               "attention_gate")

# layers executable natively on int8 activations; the rest dequantize to f32
INT8_NATIVE = {"conv2d", "conv1x1", "dense", "relu", "maxpool2", "upsample2_nearest"}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    inter_ch: int = 0  # attention junction internal channels

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv2d", "conv1x1", "dense") and (self.in_ch < 1 or self.out_ch < 1):
            raise ValidationError(f"{self.kind} needs in/out channels >= 1")
        if self.kind == "conv2d":
            if self.kernel < 1 or self.kernel % 2 == 0:
                raise ValidationError(f"conv kernel must be odd and >= 1, got {self.kernel}")
            if self.stride < 1:
                raise ValidationError(f"stride must be >= 1, got {self.stride}")

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        for k in ("in_ch", "out_ch", "kernel", "inter_ch"):
            if getattr(self, k):
                d[k] = getattr(self, k)
        if self.kind == "conv2d":
            d["stride"] = self.stride
            d["pad"] = self.pad
        return d

    @classmethod
    def from_json(cls, d: dict) -> "LayerSpec":
        return cls(kind=d["kind"], in_ch=d.get("in_ch", 0), out_ch=d.get("out_ch", 0),
                   kernel=d.get("kernel", 0), stride=d.get("stride", 1),
                   pad=d.get("pad", 0), inter_ch=d.get("inter_ch", 0))


@dataclass(frozen=True)
class SkipLink:
    src: int
    dst: int
    mode: str  # "concat" | "attention-gated"

    def __post_init__(self):
        if self.mode not in ("concat", "attention-gated"):
            raise ValidationError(f"unknown skip mode {self.mode!r}")

    def to_json(self):
        return {"src": self.src, "dst": self.dst, "mode": self.mode}


@dataclass(frozen=True)
class ExitHead:
    attach_after: int
    layers: tuple[LayerSpec, ...]

    def to_json(self):
        return {"attach_after": self.attach_after,
                "layers": [l.to_json() for l in self.layers]}


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: tuple[int, int, int]  # (C, H, W)
    layers: tuple[LayerSpec, ...]
    skips: tuple[SkipLink, ...] = ()
    exits: tuple[ExitHead, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "skips", tuple(self.skips))
        object.__setattr__(self, "exits", tuple(self.exits))

    def skip_into(self, idx: int) -> SkipLink | None:
        for s in self.skips:
            if s.dst == idx:
                return s
        return None

    def to_json(self) -> dict:
        return {"name": self.name, "input_shape": list(self.input_shape),
                "layers": [l.to_json() for l in self.layers],
                "skips": [s.to_json() for s in self.skips],
                "exits": [e.to_json() for e in self.exits]}

    @classmethod
    def from_json(cls, d: dict) -> "NetworkSpec":
        return cls(
            name=d["name"], input_shape=tuple(d["input_shape"]),
            layers=tuple(LayerSpec.from_json(l) for l in d["layers"]),
            skips=tuple(SkipLink(**s) for s in d.get("skips", [])),
            exits=tuple(ExitHead(attach_after=e["attach_after"],
                                 layers=tuple(LayerSpec.from_json(l) for l in e["layers"]))
                        for e in d.get("exits", [])))


def infer_shapes(net: NetworkSpec) -> list[tuple]:
    """Per-layer output shapes (sans batch dim); validates the whole graph."""
    seen_dst = set()
    for s in net.skips:
        if not (0 <= s.src < s.dst < len(net.layers)):
            raise ValidationError(f"skip source {s.src} must precede destination {s.dst}")
        if s.dst in seen_dst:
            raise ValidationError(f"layer {s.dst} is the destination of two skip links")
        seen_dst.add(s.dst)
        if net.layers[s.dst].kind not in ("concat", "attention_gate"):
            raise ValidationError(
                f"skip destination {s.dst} must be a concat/attention_gate layer")
        if net.layers[s.dst].kind == "attention_gate" and s.mode != "attention-gated":
            raise ValidationError("attention_gate layers require an attention-gated link")

    shapes: list[tuple] = []
    prev = net.input_shape
    for i, layer in enumerate(net.layers):
        link = net.skip_into(i)
        src_shape = shapes[link.src] if link else None
        prev = _layer_out_shape(layer, prev, src_shape, i)
        shapes.append(prev)
    for e in net.exits:
        if not 0 <= e.attach_after < len(net.layers):
            raise ValidationError(f"exit attaches after missing layer {e.attach_after}")
        s = shapes[e.attach_after]
        for j, layer in enumerate(e.layers):
            s = _layer_out_shape(layer, s, None, f"exit:{j}")
    return shapes


def _layer_out_shape(layer: LayerSpec, prev: tuple, src: tuple | None, idx) -> tuple:
    kind = layer.kind
    if kind in ("concat", "attention_gate"):
        if src is None:
            raise ValidationError(f"layer {idx} ({kind}) needs an incoming skip link")
        if len(prev) != 3 or len(src) != 3:
            raise DimensionError(f"layer {idx}: junction inputs must be spatial maps")
        if prev[1:] != src[1:]:
            raise DimensionError(
                f"layer {idx}: skip {src[1:]} and gating {prev[1:]} spatially misaligned")
        if kind == "attention_gate":
            return src
        return (prev[0] + src[0],) + prev[1:]
    if kind in ("conv2d", "conv1x1"):
        if len(prev) != 3 or prev[0] != layer.in_ch:
            raise DimensionError(
                f"layer {idx}: conv expects {layer.in_ch} channels, gets {prev}")
        k = layer.kernel if kind == "conv2d" else 1
        stride = layer.stride if kind == "conv2d" else 1
        pad = layer.pad if kind == "conv2d" else 0
        return (layer.out_ch,
                kernels.out_size(prev[1], k, stride, pad),
                kernels.out_size(prev[2], k, stride, pad))
    if kind in ("relu", "sigmoid"):
        return prev
    if kind == "softmax":
        if len(prev) != 1:
            raise DimensionError(f"layer {idx}: softmax expects a flat feature vector")
        return prev
    if kind == "maxpool2":
        if len(prev) != 3 or prev[1] % 2 or prev[2] % 2:
            raise DimensionError(f"layer {idx}: maxpool2 needs even spatial dims, got {prev}")
        return (prev[0], prev[1] // 2, prev[2] // 2)
    if kind == "upsample2_nearest":
        if len(prev) != 3:
            raise DimensionError(f"layer {idx}: upsample needs a spatial map")
        return (prev[0], prev[1] * 2, prev[2] * 2)
    if kind == "global_avg_pool":
        if len(prev) != 3:
            raise DimensionError(f"layer {idx}: GAP needs a spatial map")
        return (prev[0],)
    if kind == "dense":
        if len(prev) != 1 or prev[0] != layer.in_ch:
            raise DimensionError(
                f"layer {idx}: dense expects ({layer.in_ch},) features, gets {prev}")
        return (layer.out_ch,)
    raise ValidationError(f"unhandled kind {kind}")


@dataclass
class ForwardTrace:
    """Every executed layer's output, plus the network input."""
    input: np.ndarray
    precision: str
    outputs: list = field(default_factory=list)
    schemes: list = field(default_factory=list)  # per-layer QuantScheme or None


def attention_gate(skip: Tensor, gating: Tensor, gate_params: dict) -> Tensor:
    """alpha = sigmoid(psi . relu(Ws s + Wg g + b) + b_psi); returns skip * alpha."""
    s, g = skip.data, gating.data
    if s.shape[0] != g.shape[0] or s.shape[2:] != g.shape[2:]:
        raise DimensionError(f"skip {s.shape} and gating {g.shape} spatially misaligned")
    out, _ = _gate_forward(s, g, {k: np.asarray(v.data if isinstance(v, Tensor) else v)
                                  for k, v in gate_params.items()})
    return Tensor(out)


def _gate_forward(s: np.ndarray, g: np.ndarray, p: dict):
    ws, wg = p["w_skip"], p["w_gate"]
    if ws.shape[1] != s.shape[1]:
        raise DimensionError(f"gate projects {ws.shape[1]} skip channels, got {s.shape[1]}")
    if wg.shape[1] != g.shape[1]:
        raise DimensionError(f"gate projects {wg.shape[1]} gating channels, got {g.shape[1]}")
    u = (np.einsum("ic,nchw->nihw", ws, s, optimize=True)
         + np.einsum("ic,nchw->nihw", wg, g, optimize=True)
         + p["b_add"][None, :, None, None])
    r = np.maximum(u, 0)
    t = np.einsum("i,nihw->nhw", p["psi"], r, optimize=True)[:, None] + p["b_psi"]
    alpha = _sigmoid(t)
    return s * alpha, (u, r, t, alpha)


def _gate_backward(s, g, p, dout):
    _, (u, r, t, alpha) = _gate_forward(s, g, p)
    dalpha = (dout * s).sum(axis=1, keepdims=True)
    dt = dalpha * alpha * (1.0 - alpha)
    dr = p["psi"][None, :, None, None] * dt
    du = dr * (u > 0)
    ds = dout * alpha + np.einsum("ic,nihw->nchw", p["w_skip"], du, optimize=True)
    dg = np.einsum("ic,nihw->nchw", p["w_gate"], du, optimize=True)
    grads = {
        "w_skip": np.einsum("nihw,nchw->ic", du, s, optimize=True),
        "w_gate": np.einsum("nihw,nchw->ic", du, g, optimize=True),
        "b_add": du.sum(axis=(0, 2, 3)),
        "psi": (r * dt).sum(axis=(0, 2, 3)),
        "b_psi": np.asarray([dt.sum()]),
    }
    return ds, dg, grads


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _layer_params(params, idx, dtype=None):
    out = {}
    prefix = f"L{idx}."
    for key, t in params.tensors.items():
        if key.startswith(prefix) and key.count(".") == 1:
            arr = t.data
            if dtype is not None and arr.dtype != np.int8:
                arr = arr.astype(dtype, copy=False)
            out[key[len(prefix):]] = arr
    return out


def _float_layer_forward(layer: LayerSpec, x, src, p):
    kind = layer.kind
    if kind == "conv2d":
        return kernels.conv2d(x, p["weight"], p["bias"], layer.stride, layer.pad)
    if kind == "conv1x1":
        return kernels.conv2d(x, p["weight"], p["bias"], 1, 0)
    if kind == "relu":
        return np.maximum(x, 0)
    if kind == "maxpool2":
        n, c, h, w = x.shape
        return x.reshape(n, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))
    if kind == "upsample2_nearest":
        return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)
    if kind == "global_avg_pool":
        return x.mean(axis=(2, 3))
    if kind == "dense":
        return x @ p["weight"].T + p["bias"]
    if kind == "softmax":
        return _softmax(x)
    if kind == "sigmoid":
        return _sigmoid(x)
    if kind == "concat":
        return np.concatenate([x, src], axis=1)
    if kind == "attention_gate":
        out, _ = _gate_forward(src, x, p)
        return out
    raise ValidationError(f"unhandled kind {kind}")


def _junction_src(layer: LayerSpec, link: SkipLink, src_raw, gating, p):
    """Raw or attention-gated skip value entering a junction layer."""
    if link.mode == "attention-gated" and layer.kind == "concat":
        gated, _ = _gate_forward(src_raw, gating, p)
        return gated
    return src_raw


def run_layers(layers, x, get_params, net=None, offset=0, outputs=None):
    """Execute a float layer chain; `outputs` collects every layer output."""
    outs = outputs if outputs is not None else []
    for j, layer in enumerate(layers):
        idx = offset + j
        link = net.skip_into(idx) if net is not None else None
        p = get_params(idx)
        src = None
        if link is not None:
            src_raw = outs[link.src]
            src = _junction_src(layer, link, src_raw, x, p)
        x = _float_layer_forward(layer, x, src, p)
        outs.append(x)
    return x


def forward(net: NetworkSpec, params, inp: Tensor, precision: str = "f32"):
    """Run the network; returns (output Tensor, ForwardTrace).

    precision f32/f64 requires float Params; int8 requires QuantizedParams.
    """
    if precision not in ("f32", "f64", "int8"):
        raise ConfigurationError(f"unknown precision {precision!r}")
    infer_shapes(net)
    x = inp.data
    if x.ndim == len(net.input_shape):
        x = x[None]
    if x.shape[1:] != tuple(net.input_shape):
        raise DimensionError(
            f"input shape {x.shape[1:]} != network input {net.input_shape}")
    if precision == "int8":
        if getattr(params, "precision", "f32") != "int8":
            raise ConfigurationError("int8 forward requires quantized Params")
        return _forward_int8(net, params, x)
    if getattr(params, "precision", "f32") != "f32":
        raise ConfigurationError(f"{precision} forward requires float Params")
    dtype = np.float32 if precision == "f32" else np.float64
    x = x.astype(dtype)
    trace = ForwardTrace(input=x, precision=precision)
    out = run_layers(net.layers, x, lambda i: _layer_params(params, i, dtype),
                     net=net, outputs=trace.outputs)
    trace.schemes = [None] * len(trace.outputs)
    return Tensor(out), trace


def run_exit_head(net: NetworkSpec, params, trace: ForwardTrace, exit_idx: int = 0):
    """Evaluate an early-exit head on a (possibly partial) trace.

    Heads always run in float; int8 trunk activations are dequantized first.
    """
    e = net.exits[exit_idx]
    if len(trace.outputs) <= e.attach_after:
        raise ConfigurationError(
            f"trace has {len(trace.outputs)} layers; exit needs {e.attach_after + 1}")
    x = trace.outputs[e.attach_after]
    scheme = trace.schemes[e.attach_after] if trace.schemes else None
    if scheme is not None:
        x = _dequant(x, scheme)
    x = x.astype(np.float32, copy=False)

    def get_params(idx):
        out = {}
        prefix = f"X{exit_idx}.L{idx}."
        for key, t in params.tensors.items():
            if key.startswith(prefix):
                out[key[len(prefix):]] = t.data.astype(np.float32, copy=False)
        return out

    return Tensor(run_layers(e.layers, x, get_params))


def forward_partial(net: NetworkSpec, params, inp: Tensor, upto_layer: int,
                    precision: str = "f32") -> ForwardTrace:
    """Run layers 0..upto_layer inclusive; enough to feed an exit head."""
    sub = NetworkSpec(name=net.name, input_shape=net.input_shape,
                      layers=net.layers[:upto_layer + 1],
                      skips=tuple(s for s in net.skips if s.dst <= upto_layer))
    _, trace = forward(sub, params, inp, precision)
    return trace


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def backward(net: NetworkSpec, params, trace: ForwardTrace, output_grad: Tensor,
             start_layer: int | None = None, return_act_grads: bool = False):
    """Vector-Jacobian products down the layer chain.

    Returns (param_grads, input_grad) where param_grads mirrors the Params
    tensor keys. `start_layer` begins backpropagation at that layer's output
    (default: the last layer); with return_act_grads=True the per-layer
    output gradients are appended to the result.
    """
    if trace.precision == "int8":
        raise UnsupportedError("backward through an int8 trace is not supported")
    dtype = np.float32 if trace.precision == "f32" else np.float64
    last = len(net.layers) - 1 if start_layer is None else start_layer
    g = np.asarray(output_grad.data, dtype=dtype)
    if g.shape != trace.outputs[last].shape:
        raise DimensionError(
            f"output grad shape {g.shape} != layer output {trace.outputs[last].shape}")

    act_grads: list = [None] * len(net.layers)
    act_grads[last] = g.copy()
    param_grads: dict[str, np.ndarray] = {}
    input_grad = None

    for idx in range(last, -1, -1):
        layer = net.layers[idx]
        dout = act_grads[idx]
        if dout is None:
            continue
        x = trace.input if idx == 0 else trace.outputs[idx - 1]
        link = net.skip_into(idx)
        src = trace.outputs[link.src] if link else None
        p = _layer_params(params, idx, dtype)
        dx, dsrc, pgrads = _layer_backward(layer, link, x, src, p, dout,
                                           trace.outputs[idx])
        for name, grad in pgrads.items():
            key = f"L{idx}.{name}"
            param_grads[key] = param_grads.get(key, 0) + grad
        if link is not None and dsrc is not None:
            if act_grads[link.src] is None:
                act_grads[link.src] = np.zeros_like(trace.outputs[link.src])
            act_grads[link.src] += dsrc
        if idx == 0:
            input_grad = dx
        else:
            if act_grads[idx - 1] is None:
                act_grads[idx - 1] = np.zeros_like(trace.outputs[idx - 1])
            act_grads[idx - 1] += dx

    if return_act_grads:
        return param_grads, Tensor(input_grad), act_grads
    return param_grads, Tensor(input_grad)


def _layer_backward(layer, link, x, src, p, dout, out):
    """Returns (dx, dsrc, param_grads) for one layer."""
    kind = layer.kind
    if kind in ("conv2d", "conv1x1"):
        stride = layer.stride if kind == "conv2d" else 1
        pad = layer.pad if kind == "conv2d" else 0
        dx, dw, db = kernels.conv2d_backward(x, p["weight"], stride, pad, dout)
        return dx, None, {"weight": dw, "bias": db}
    if kind == "relu":
        return dout * (x > 0), None, {}
    if kind == "maxpool2":
        n, c, h, w = x.shape
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2)
        flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        arg = flat.argmax(axis=-1)
        dxf = np.zeros_like(flat)
        np.put_along_axis(dxf, arg[..., None], dout[..., None], axis=-1)
        dx = dxf.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(x.shape), None, {}
    if kind == "upsample2_nearest":
        n, c, h, w = dout.shape
        return dout.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5)), None, {}
    if kind == "global_avg_pool":
        n, c, h, w = x.shape
        return np.broadcast_to((dout / (h * w))[:, :, None, None], x.shape).copy(), None, {}
    if kind == "dense":
        return dout @ p["weight"], None, {"weight": dout.T @ x, "bias": dout.sum(axis=0)}
    if kind == "softmax":
        dot = (dout * out).sum(axis=1, keepdims=True)
        return out * (dout - dot), None, {}
    if kind == "sigmoid":
        return dout * out * (1.0 - out), None, {}
    if kind == "concat":
        c_prev = x.shape[1]
        dx = dout[:, :c_prev]
        dsrc_in = np.ascontiguousarray(dout[:, c_prev:])
        if link.mode == "attention-gated":
            ds, dg, grads = _gate_backward(src, x, p, dsrc_in)
            return dx + dg, ds, grads
        return dx, dsrc_in, {}
    if kind == "attention_gate":
        ds, dg, grads = _gate_backward(src, x, p, dout)
        return dg, ds, grads
    raise ValidationError(f"unhandled kind {kind}")


# ---------------------------------------------------------------------------
# int8 execution
# ---------------------------------------------------------------------------

def _quant(x: np.ndarray, scheme: QuantScheme) -> np.ndarray:
    q = np.rint(x / scheme.scale[0]) + scheme.zero_point
    return np.clip(q, -128, 127).astype(np.int8)


def _dequant(q: np.ndarray, scheme: QuantScheme) -> np.ndarray:
    if scheme.granularity == "per-channel":
        scales = scheme.scales.reshape((-1,) + (1,) * (q.ndim - 1)).astype(np.float32)
        return (q.astype(np.float32)) * scales
    return (q.astype(np.float32) - scheme.zero_point) * np.float32(scheme.scale[0])


def _fold_offsets(qp, idx, layer, in_scheme):
    """Precompute (offset, mult) for a quantized conv/dense layer."""
    cache = qp.runtime_cache.setdefault("fold", {})
    key = (idx, in_scheme.scale, in_scheme.zero_point)
    if key in cache:
        return cache[key]
    w_t = qp.tensors[f"L{idx}.weight"]
    qw = w_t.data
    w_scales = w_t.quant.scales
    bias = qp.tensors[f"L{idx}.bias"].data.astype(np.float64)
    s_in = in_scheme.scale[0]
    out_scheme = qp.act_schemes[idx]
    axes = tuple(range(1, qw.ndim))
    wsum = qw.astype(np.int64).sum(axis=axes)
    bias_q = np.rint(bias / (s_in * w_scales)).astype(np.int64)
    offset = (bias_q - in_scheme.zero_point * wsum).astype(np.int32)
    mult = (s_in * w_scales / out_scheme.scale[0]).astype(np.float64)
    result = (offset, mult, out_scheme)
    cache[key] = result
    return result


def _forward_int8(net: NetworkSpec, qp, x: np.ndarray):
    trace = ForwardTrace(input=x.astype(np.float32), precision="int8")
    cur = _quant(x.astype(np.float32), qp.input_scheme)
    cur_scheme: QuantScheme | None = qp.input_scheme
    for idx, layer in enumerate(net.layers):
        kind = layer.kind
        link = net.skip_into(idx)
        native = (kind in INT8_NATIVE and idx not in qp.fallback_layers
                  and link is None)
        if native and kind in ("conv2d", "conv1x1", "dense"):
            if cur_scheme is None:
                prev_scheme = qp.act_schemes[idx - 1]
                cur = _quant(cur, prev_scheme)
                cur_scheme = prev_scheme
            offset, mult, out_scheme = _fold_offsets(qp, idx, layer, cur_scheme)
            qw = qp.tensors[f"L{idx}.weight"].data
            if kind == "dense":
                cur = kernels.qdense(cur, qw, offset, mult, out_scheme.zero_point)
            else:
                stride = layer.stride if kind == "conv2d" else 1
                pad = layer.pad if kind == "conv2d" else 0
                cur = kernels.qconv2d(cur, cur_scheme.zero_point, qw, offset, mult,
                                      out_scheme.zero_point, stride, pad)
            cur_scheme = out_scheme
        elif native and cur_scheme is not None:
            if kind == "relu":
                cur = kernels.qrelu(cur, cur_scheme.zero_point)
            elif kind == "maxpool2":
                cur = kernels.qmaxpool2(cur)
            else:  # upsample2_nearest
                cur = np.repeat(np.repeat(cur, 2, axis=2), 2, axis=3)
        else:
            # f32 fallback: dequantize inputs, run the float op, stay float;
            # the next quantized consumer requantizes with this layer's scheme.
            xf = _dequant(cur, cur_scheme) if cur_scheme is not None else cur
            src = None
            if link is not None:
                src = trace.outputs[link.src]
                sscheme = trace.schemes[link.src]
                if sscheme is not None:
                    src = _dequant(src, sscheme)
                src = _junction_src(layer, link, src, xf,
                                    _layer_params(qp, idx, np.float32))
            cur = _float_layer_forward(layer, xf, src, _layer_params(qp, idx, np.float32))
            cur_scheme = None
            if kind in INT8_NATIVE:  # native kind forced to fallback by config
                cur = _quant(cur, qp.act_schemes[idx])
                cur_scheme = qp.act_schemes[idx]
        trace.outputs.append(cur)
        trace.schemes.append(cur_scheme)
    out = cur if cur_scheme is None else _dequant(cur, cur_scheme)
    return Tensor(out.astype(np.float32)), trace
