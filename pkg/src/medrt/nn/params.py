"""Learned-weight containers.

Params maps tensor keys ("L3.weight", "X0.L1.bias", "L9.w_skip", ...) to
Tensors and carries the NetworkSpec it belongs to. Mutating operations
(pruning, fine-tuning, quantization) produce a new Params with version + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from medrt.errors import ValidationError
from medrt.nn.network import LayerSpec, NetworkSpec, _layer_out_shape, infer_shapes
from medrt.nn.tensor import QuantScheme, Tensor


@dataclass
class Params:
    net: NetworkSpec
    tensors: dict[str, Tensor]
    model_id: str
    version: int = 1
    seed: int = 0
    precision: str = "f32"

    def bumped(self, **changes) -> "Params":
        """Copy with version + 1; used by every mutating transformation."""
        out = replace(self, **changes)
        out.version = self.version + 1
        return out

    def param_bytes(self) -> int:
        """Serialized payload size: raw data plus quant scheme overhead."""
        total = 0
        for t in self.tensors.values():
            total += t.data.nbytes
            if t.quant is not None:
                total += 8 * len(t.quant.scale) + 4
        return total

    def equals(self, other: "Params") -> bool:
        if set(self.tensors) != set(other.tensors):
            return False
        return all(np.array_equal(self.tensors[k].data, other.tensors[k].data)
                   for k in self.tensors)


@dataclass
class QuantizedParams(Params):
    """int8 weights + calibrated activation schemes.

    act_schemes[i] is the affine scheme of layer i's output; input_scheme
    covers the network input; fallback_layers execute in f32.
    """
    input_scheme: QuantScheme = None
    act_schemes: dict[int, QuantScheme] = field(default_factory=dict)
    fallback_layers: frozenset[int] = frozenset()
    runtime_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.precision = "int8"
        if self.input_scheme is None:
            raise ValidationError("QuantizedParams needs an input scheme")


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def _bias_uniform(rng: np.random.Generator, n: int, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=n).astype(np.float32)


def _init_weighted(rng, layer: LayerSpec, key: str, out: dict):
    kind = layer.kind
    if kind in ("conv2d", "conv1x1"):
        k = layer.kernel if kind == "conv2d" else 1
        fan_in = layer.in_ch * k * k
        out[f"{key}.weight"] = Tensor(
            _kaiming_uniform(rng, (layer.out_ch, layer.in_ch, k, k), fan_in))
        out[f"{key}.bias"] = Tensor(_bias_uniform(rng, layer.out_ch, fan_in))
    elif kind == "dense":
        out[f"{key}.weight"] = Tensor(
            _kaiming_uniform(rng, (layer.out_ch, layer.in_ch), layer.in_ch))
        out[f"{key}.bias"] = Tensor(_bias_uniform(rng, layer.out_ch, layer.in_ch))


def _init_gate(rng, inter_ch: int, skip_ch: int, gating_ch: int, key: str, out: dict):
    out[f"{key}.w_skip"] = Tensor(_kaiming_uniform(rng, (inter_ch, skip_ch), skip_ch))
    out[f"{key}.w_gate"] = Tensor(_kaiming_uniform(rng, (inter_ch, gating_ch), gating_ch))
    out[f"{key}.b_add"] = Tensor(np.zeros(inter_ch, dtype=np.float32))
    out[f"{key}.psi"] = Tensor(_kaiming_uniform(rng, (inter_ch,), inter_ch))
    out[f"{key}.b_psi"] = Tensor(np.zeros(1, dtype=np.float32))


def init_params(net: NetworkSpec, model_id: str, seed: int = 0) -> Params:
    """Kaiming-uniform fan-in initialization from a seeded PRNG."""
    shapes = infer_shapes(net)
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    prev = net.input_shape
    for i, layer in enumerate(net.layers):
        link = net.skip_into(i)
        gated = (layer.kind == "attention_gate"
                 or (layer.kind == "concat" and link is not None
                     and link.mode == "attention-gated"))
        if gated:
            if layer.inter_ch < 1:
                raise ValidationError(f"layer {i}: attention junction needs inter_ch >= 1")
            _init_gate(rng, layer.inter_ch, shapes[link.src][0], prev[0], f"L{i}", tensors)
        else:
            _init_weighted(rng, layer, f"L{i}", tensors)
        prev = shapes[i]
    for e_idx, e in enumerate(net.exits):
        p = shapes[e.attach_after]
        for j, layer in enumerate(e.layers):
            _init_weighted(rng, layer, f"X{e_idx}.L{j}", tensors)
            p = _layer_out_shape(layer, p, None, f"exit:{j}")
    return Params(net=net, tensors=tensors, model_id=model_id, version=1, seed=seed)
