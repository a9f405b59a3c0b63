"""Structured channel pruning (L1 filter norms) and unstructured masking.

Structured pruning removes whole conv output channels and rebuilds every
consumer: downstream convs, dense heads fed through GAP, concat junctions,
attention-gate projections, and exit heads. Channel bookkeeping works on a
"composition" per layer output: which (producer layer, original channel)
each channel position came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from medrt.errors import ValidationError
from medrt.nn.network import LayerSpec, NetworkSpec, infer_shapes
from medrt.nn.params import Params
from medrt.nn.tensor import Tensor

INPUT_ORIGIN = -1


@dataclass(frozen=True)
class PrunePlan:
    removed: dict[int, tuple[int, ...]]  # layer idx -> removed output channels
    criterion: str
    fraction_requested: float
    fraction_achieved: float

    def to_json(self) -> dict:
        return {"removed": {str(k): list(v) for k, v in self.removed.items()},
                "criterion": self.criterion,
                "fraction_requested": self.fraction_requested,
                "fraction_achieved": self.fraction_achieved}


@dataclass(frozen=True)
class UnstructuredReport:
    sparsity_requested: float
    sparsity_achieved: float
    zeroed: int
    total: int
    note: str = ("unstructured masking shrinks parameter entropy only; dense-kernel "
                 "latency is unchanged")


def _compositions(net: NetworkSpec):
    """Per layer, the (origin, channel) pair behind each output channel slot."""
    comps: list[list[tuple[int, int]]] = []
    prev = [(INPUT_ORIGIN, c) for c in range(net.input_shape[0])]
    for i, layer in enumerate(net.layers):
        link = net.skip_into(i)
        kind = layer.kind
        if kind in ("conv2d", "conv1x1"):
            cur = [(i, c) for c in range(layer.out_ch)]
        elif kind == "dense":
            cur = [(i, c) for c in range(layer.out_ch)]
        elif kind == "concat":
            cur = prev + comps[link.src]
        elif kind == "attention_gate":
            cur = list(comps[link.src])
        else:
            cur = list(prev)
        comps.append(cur)
        prev = cur
    return comps


def _l1_ranking(w: np.ndarray) -> np.ndarray:
    """Channel indices sorted by (L1 norm, index) ascending."""
    norms = np.abs(w.reshape(w.shape[0], -1)).sum(axis=1)
    return np.lexsort((np.arange(len(norms)), norms))


def prune_structured(net: NetworkSpec, params: Params, fraction: float,
                     criterion: str = "l1"):
    """Remove the lowest-L1 output channels of every prunable conv layer.

    Returns (new net, new Params, PrunePlan). fraction 0 is a no-op apart
    from the version bump.
    """
    if not 0 <= fraction < 1:
        raise ValidationError(f"fraction must be in [0, 1), got {fraction}")
    if criterion != "l1":
        raise ValidationError(f"unknown criterion {criterion!r}")
    if params.precision != "f32":
        raise ValidationError("prune_structured needs f32 Params")
    infer_shapes(net)

    removed: dict[int, tuple[int, ...]] = {}
    keep: dict[int, np.ndarray] = {}
    total_prunable = 0
    total_removed = 0
    for i, layer in enumerate(net.layers):
        if layer.kind not in ("conv2d", "conv1x1"):
            continue
        w = params.tensors[f"L{i}.weight"].data
        cout = w.shape[0]
        total_prunable += cout
        n_remove = int(np.floor(fraction * cout))
        if cout - n_remove < 1:
            raise ValidationError(
                f"layer {i}: removing {n_remove} of {cout} channels leaves none")
        if n_remove == 0:
            continue
        ranking = _l1_ranking(w)
        gone = np.sort(ranking[:n_remove])
        removed[i] = tuple(int(c) for c in gone)
        keep[i] = np.setdiff1d(np.arange(cout), gone)
        total_removed += n_remove

    comps = _compositions(net)

    def surviving(comp):
        return [p for p, (origin, ch) in enumerate(comp)
                if origin not in keep or ch in keep[origin]]

    def survivors_before(idx):
        comp = ([(INPUT_ORIGIN, c) for c in range(net.input_shape[0])]
                if idx == 0 else comps[idx - 1])
        return comp, surviving(comp)

    new_layers: list[LayerSpec] = []
    new_tensors: dict[str, Tensor] = dict(params.tensors)
    for i, layer in enumerate(net.layers):
        kind = layer.kind
        link = net.skip_into(i)
        if kind in ("conv2d", "conv1x1"):
            comp, cols = survivors_before(i)
            rows = keep.get(i, np.arange(layer.out_ch))
            w = params.tensors[f"L{i}.weight"].data
            b = params.tensors[f"L{i}.bias"].data
            new_tensors[f"L{i}.weight"] = Tensor(np.ascontiguousarray(w[rows][:, cols]))
            new_tensors[f"L{i}.bias"] = Tensor(np.ascontiguousarray(b[rows]))
            new_layers.append(LayerSpec(kind=kind, in_ch=len(cols), out_ch=len(rows),
                                        kernel=layer.kernel, stride=layer.stride,
                                        pad=layer.pad))
        elif kind == "dense":
            comp, cols = survivors_before(i)
            w = params.tensors[f"L{i}.weight"].data
            new_tensors[f"L{i}.weight"] = Tensor(np.ascontiguousarray(w[:, cols]))
            new_layers.append(LayerSpec(kind=kind, in_ch=len(cols), out_ch=layer.out_ch))
        elif kind in ("concat", "attention_gate") and f"L{i}.w_skip" in params.tensors:
            skip_cols = surviving(comps[link.src])
            _, gate_cols = survivors_before(i)
            ws = params.tensors[f"L{i}.w_skip"].data
            wg = params.tensors[f"L{i}.w_gate"].data
            new_tensors[f"L{i}.w_skip"] = Tensor(np.ascontiguousarray(ws[:, skip_cols]))
            new_tensors[f"L{i}.w_gate"] = Tensor(np.ascontiguousarray(wg[:, gate_cols]))
            new_layers.append(layer)
        else:
            new_layers.append(layer)

    new_exits = []
    for e_idx, e in enumerate(net.exits):
        comp = comps[e.attach_after]
        cols = surviving(comp)
        exit_layers = []
        cur_cols = cols
        for j, layer in enumerate(e.layers):
            if layer.kind == "dense":
                w = params.tensors[f"X{e_idx}.L{j}.weight"].data
                new_tensors[f"X{e_idx}.L{j}.weight"] = Tensor(
                    np.ascontiguousarray(w[:, cur_cols]))
                exit_layers.append(LayerSpec(kind="dense", in_ch=len(cur_cols),
                                             out_ch=layer.out_ch))
                cur_cols = list(range(layer.out_ch))
            elif layer.kind in ("conv2d", "conv1x1"):
                w = params.tensors[f"X{e_idx}.L{j}.weight"].data
                new_tensors[f"X{e_idx}.L{j}.weight"] = Tensor(
                    np.ascontiguousarray(w[:, cur_cols]))
                exit_layers.append(LayerSpec(kind=layer.kind, in_ch=len(cur_cols),
                                             out_ch=layer.out_ch, kernel=layer.kernel,
                                             stride=layer.stride, pad=layer.pad))
                cur_cols = list(range(layer.out_ch))
            else:
                exit_layers.append(layer)
        new_exits.append(type(e)(attach_after=e.attach_after, layers=tuple(exit_layers)))

    new_net = NetworkSpec(name=net.name, input_shape=net.input_shape,
                          layers=tuple(new_layers), skips=net.skips,
                          exits=tuple(new_exits))
    infer_shapes(new_net)  # sanity: rebuilt graph must validate
    achieved = total_removed / total_prunable if total_prunable else 0.0
    plan = PrunePlan(removed=removed, criterion="l1",
                     fraction_requested=float(fraction),
                     fraction_achieved=float(achieved))
    new_params = params.bumped(net=new_net, tensors=new_tensors)
    return new_net, new_params, plan


def prune_unstructured(params: Params, sparsity: float):
    """Zero the globally smallest-magnitude conv/dense weights.

    Returns (masked Params, UnstructuredReport). Latency accounting is
    honest: kernels stay dense, only parameter entropy shrinks.
    """
    if not 0 <= sparsity < 1:
        raise ValidationError(f"sparsity must be in [0, 1), got {sparsity}")
    weight_keys = [k for k in params.tensors if k.endswith(".weight")]
    sizes = {k: params.tensors[k].data.size for k in weight_keys}
    total = sum(sizes.values())
    n_zero = int(np.floor(sparsity * total))
    if n_zero == 0:
        return params.bumped(), UnstructuredReport(sparsity, 0.0, 0, total)

    mags = np.concatenate([np.abs(params.tensors[k].data).ravel() for k in weight_keys])
    order = np.argsort(mags, kind="stable")
    cut = np.zeros(total, dtype=bool)
    cut[order[:n_zero]] = True

    new_tensors = dict(params.tensors)
    pos = 0
    for k in weight_keys:
        size = sizes[k]
        mask = cut[pos:pos + size].reshape(params.tensors[k].data.shape)
        arr = params.tensors[k].data.copy()
        arr[mask] = 0.0
        new_tensors[k] = Tensor(arr)
        pos += size
    report = UnstructuredReport(sparsity, n_zero / total, n_zero, total)
    return params.bumped(tensors=new_tensors), report
