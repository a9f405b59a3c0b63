"""Analytical per-layer cost model backing deployment comparisons.

Latency estimate per inference: fixed device overhead plus, per layer,
max(compute time, memory time) where compute = MACs / device MAC rate and
memory = bytes moved / bandwidth. Numbers are illustrative device classes,
not hardware ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from medrt.errors import EstimationError, ValidationError
from medrt.nn.network import NetworkSpec, infer_shapes

_KNOWN = {"conv2d", "conv1x1", "relu", "maxpool2", "upsample2_nearest",
          "global_avg_pool", "dense", "softmax", "sigmoid", "concat",
          "attention_gate"}


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    macs_per_s_f32: float
    macs_per_s_int8: float
    bandwidth_bytes_per_s: float
    overhead_ms: float

    def __post_init__(self):
        if self.macs_per_s_f32 <= 0 or self.macs_per_s_int8 <= 0:
            raise ValidationError("MAC rates must be positive")
        if self.macs_per_s_int8 < self.macs_per_s_f32:
            raise ValidationError("int8 rate must be >= f32 rate")
        if self.bandwidth_bytes_per_s <= 0:
            raise ValidationError("bandwidth must be positive")

    def rate(self, precision: str) -> float:
        return self.macs_per_s_int8 if precision == "int8" else self.macs_per_s_f32


DEVICE_PROFILES = {
    "edge": DeviceProfile("edge", 5e9, 15e9, 10e9, 1.0),
    "server": DeviceProfile("server", 50e9, 150e9, 50e9, 0.3),
    "cloud": DeviceProfile("cloud", 200e9, 600e9, 100e9, 5.0),
}


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: str
    macs: int
    param_bytes: int
    act_bytes: int
    compute_ms: float
    memory_ms: float
    latency_ms: float


@dataclass(frozen=True)
class CostReport:
    precision: str
    device: DeviceProfile
    layers: tuple[LayerCost, ...]
    total_macs: int
    total_param_bytes: int
    total_act_bytes: int
    latency_ms: float  # overhead + sum of per-layer latencies

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "device": self.device.name,
            "overhead_ms": self.device.overhead_ms,
            "layers": [{"index": c.index, "kind": c.kind, "macs": c.macs,
                        "param_bytes": c.param_bytes, "act_bytes": c.act_bytes,
                        "compute_ms": c.compute_ms, "memory_ms": c.memory_ms,
                        "latency_ms": c.latency_ms} for c in self.layers],
            "total_macs": self.total_macs,
            "total_param_bytes": self.total_param_bytes,
            "total_act_bytes": self.total_act_bytes,
            "latency_ms": self.latency_ms,
        }

    def text_table(self) -> str:
        rows = [f"{'layer':>5} {'kind':<18} {'MACs':>12} {'param B':>10} "
                f"{'act B':>10} {'ms':>9}"]
        for c in self.layers:
            rows.append(f"{c.index:>5} {c.kind:<18} {c.macs:>12} {c.param_bytes:>10} "
                        f"{c.act_bytes:>10} {c.latency_ms:>9.4f}")
        rows.append(f"{'total':>5} {'(+overhead)':<18} {self.total_macs:>12} "
                    f"{self.total_param_bytes:>10} {self.total_act_bytes:>10} "
                    f"{self.latency_ms:>9.4f}")
        return "\n".join(rows)


def _layer_macs(layer, in_shape, out_shape) -> int:
    kind = layer.kind
    if kind in ("conv2d", "conv1x1"):
        k = layer.kernel if kind == "conv2d" else 1
        _, ho, wo = out_shape
        return layer.out_ch * layer.in_ch * k * k * ho * wo
    if kind == "dense":
        return layer.in_ch * layer.out_ch
    if kind in ("concat", "attention_gate") and layer.inter_ch:
        cs = out_shape[0] if kind == "attention_gate" else out_shape[0] - in_shape[0]
        cg = in_shape[0]
        h, w = in_shape[1], in_shape[2]
        return layer.inter_ch * (cs + cg + 1) * h * w
    if kind in _KNOWN:
        return 0
    raise EstimationError(f"cannot price layer kind {layer.kind!r}")


def _param_bytes(layer, in_shape, out_shape, precision: str) -> int:
    kind = layer.kind
    wbytes = 1 if precision == "int8" and kind in ("conv2d", "conv1x1", "dense") else 4
    if kind in ("conv2d", "conv1x1"):
        k = layer.kernel if kind == "conv2d" else 1
        return layer.out_ch * layer.in_ch * k * k * wbytes + layer.out_ch * 4
    if kind == "dense":
        return layer.out_ch * layer.in_ch * wbytes + layer.out_ch * 4
    if kind in ("concat", "attention_gate") and layer.inter_ch:
        ci = layer.inter_ch
        cs = out_shape[0] if kind == "attention_gate" else out_shape[0] - in_shape[0]
        cg = in_shape[0]
        return 4 * (ci * cs + ci * cg + 2 * ci + 1)  # gates always run f32
    return 0


def estimate_cost(net: NetworkSpec, precision: str = "f32",
                  device: DeviceProfile | str = "edge") -> CostReport:
    if isinstance(device, str):
        if device not in DEVICE_PROFILES:
            raise ValidationError(f"unknown device profile {device!r}")
        device = DEVICE_PROFILES[device]
    if precision not in ("f32", "f64", "int8"):
        raise ValidationError(f"unknown precision {precision!r}")
    shapes = infer_shapes(net)
    act_elem_bytes = 1 if precision == "int8" else (8 if precision == "f64" else 4)

    layers = []
    total_macs = total_pb = total_ab = 0
    total_latency = 0.0
    prev = net.input_shape
    for i, layer in enumerate(net.layers):
        if layer.kind not in _KNOWN:
            raise EstimationError(f"cannot price layer kind {layer.kind!r}")
        out_shape = shapes[i]
        macs = _layer_macs(layer, prev, out_shape)
        pb = _param_bytes(layer, prev, out_shape, precision)
        in_elems = int(np.prod(prev))
        out_elems = int(np.prod(out_shape))
        ab = (in_elems + out_elems) * act_elem_bytes
        rate = device.rate(precision)
        compute_ms = macs / rate * 1e3
        memory_ms = (pb + ab) / device.bandwidth_bytes_per_s * 1e3
        lat = max(compute_ms, memory_ms)
        layers.append(LayerCost(i, layer.kind, macs, pb, ab, compute_ms, memory_ms, lat))
        total_macs += macs
        total_pb += pb
        total_ab += ab
        total_latency += lat
        prev = out_shape

    return CostReport(precision=precision, device=device, layers=tuple(layers),
                      total_macs=total_macs, total_param_bytes=total_pb,
                      total_act_bytes=total_ab,
                      latency_ms=device.overhead_ms + total_latency)
