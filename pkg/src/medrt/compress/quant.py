"""Post-training int8 quantization.

Weights are per-output-channel symmetric; activations per-tensor affine,
calibrated from forward passes over a sample set. Layers the engine cannot
run natively in int8 fall back to f32 and are recorded on the result.
"""

from __future__ import annotations

import warnings

import numpy as np

from medrt.errors import ConfigurationError, ValidationError
from medrt.nn.network import INT8_NATIVE, forward
from medrt.nn.params import Params, QuantizedParams
from medrt.nn.tensor import QuantScheme, Tensor

SCALE_FLOOR = 1e-8


def calibrate(samples, method: str = "minmax") -> QuantScheme:
    """Per-tensor affine scheme from observed activation values.

    minmax maps [min, max] onto [-128, 127]; percentile(p) clips to the
    [p, 100-p] percentile range first (sort-based nearest rank). A constant
    sample set widens its range to include zero so the constant stays
    representable; an all-zero set floors the scale at 1e-8.
    """
    vals = np.asarray(samples, dtype=np.float64).ravel()
    if vals.size == 0:
        raise ConfigurationError("calibration needs at least one sample")
    if method == "minmax":
        lo, hi = float(vals.min()), float(vals.max())
    elif method.startswith("percentile"):
        p = 0.1
        if "(" in method:
            if not method.endswith(")"):
                raise ConfigurationError(f"malformed method {method!r}")
            p = float(method[method.index("(") + 1:-1])
        lo, hi = percentile_bounds(vals, p)
    else:
        raise ConfigurationError(f"unknown calibration method {method!r}")
    return scheme_from_range(lo, hi)


def percentile_bounds(vals: np.ndarray, p: float) -> tuple[float, float]:
    """Nearest-rank [p, 100-p] percentile clip bounds on sorted samples.

    The 1e-9 guard keeps ceil() stable when q*n lands on an integer up to
    float rounding (e.g. 0.999 * 10000).
    """
    if not 0 < p < 50:
        raise ConfigurationError(f"percentile p must be in (0, 50), got {p}")
    v = np.sort(vals)
    n = v.size
    lo_rank = max(int(np.ceil(p / 100.0 * n - 1e-9)), 1)
    hi_rank = max(int(np.ceil((100.0 - p) / 100.0 * n - 1e-9)), 1)
    return float(v[lo_rank - 1]), float(v[hi_rank - 1])


def scheme_from_range(lo: float, hi: float) -> QuantScheme:
    if hi == lo:
        warnings.warn(f"constant activations (value {lo}); widening range to zero",
                      RuntimeWarning, stacklevel=2)
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    scale = max((hi - lo) / 255.0, SCALE_FLOOR)
    zero_point = int(np.clip(-128 - np.rint(lo / scale), -128, 127))
    return QuantScheme.per_tensor(scale, zero_point)


def quantize_tensor(x: Tensor, scheme: QuantScheme) -> Tensor:
    """q = clamp(rint(x / scale) + zero_point, -128, 127)."""
    arr = x.data.astype(np.float64)
    if scheme.granularity == "per-channel":
        if len(scheme.scale) != arr.shape[0]:
            raise ValidationError(
                f"per-channel scheme has {len(scheme.scale)} scales for "
                f"{arr.shape[0]} channels")
        scales = scheme.scales.reshape((-1,) + (1,) * (arr.ndim - 1))
        q = np.rint(arr / scales)
    else:
        q = np.rint(arr / scheme.scale[0]) + scheme.zero_point
    return Tensor.i8(np.clip(q, -128, 127), scheme)


def dequantize(q: Tensor, scheme: QuantScheme | None = None) -> Tensor:
    scheme = scheme or q.quant
    arr = q.data.astype(np.float32)
    if scheme.granularity == "per-channel":
        scales = scheme.scales.reshape((-1,) + (1,) * (arr.ndim - 1)).astype(np.float32)
        return Tensor(arr * scales)
    return Tensor((arr - scheme.zero_point) * np.float32(scheme.scale[0]))


def weight_scheme(w: np.ndarray) -> QuantScheme:
    """Symmetric per-output-channel scales: max|w_c| / 127."""
    axes = tuple(range(1, w.ndim))
    amax = np.abs(w).max(axis=axes)
    scales = np.maximum(amax / 127.0, SCALE_FLOOR)
    return QuantScheme.per_channel(scales)


def quantize_model(params: Params, calib_set, method: str = "minmax") -> QuantizedParams:
    """PTQ: per-channel int8 weights + per-tensor activation schemes.

    calib_set is an iterable of network inputs (arrays or Tensors). Junction
    and non-arithmetic layers fall back to f32 execution; exit heads stay f32.
    """
    if params.precision != "f32":
        raise ConfigurationError("quantize_model needs f32 Params")
    calib = [c.data if isinstance(c, Tensor) else np.asarray(c, np.float32)
             for c in calib_set]
    if not calib:
        raise ConfigurationError("calibration set is empty")

    net = params.net
    acts: dict[int, list] = {i: [] for i in range(len(net.layers))}
    for sample in calib:
        _, trace = forward(net, params, Tensor.f32(sample), "f32")
        for i, out in enumerate(trace.outputs):
            acts[i].append(out)

    input_scheme = calibrate(np.concatenate([c.ravel() for c in calib]), method)
    act_schemes = {i: calibrate(np.concatenate([a.ravel() for a in acts[i]]), method)
                   for i in range(len(net.layers))}

    fallback = frozenset(
        i for i, layer in enumerate(net.layers)
        if layer.kind not in INT8_NATIVE or net.skip_into(i) is not None)

    tensors: dict[str, Tensor] = {}
    for key, t in params.tensors.items():
        if key.endswith(".weight") and key.startswith("L"):
            idx = int(key[1:key.index(".")])
            if idx not in fallback and net.layers[idx].kind in ("conv2d", "conv1x1", "dense"):
                ws = weight_scheme(t.data)
                tensors[key] = quantize_tensor(t, ws)
                continue
        tensors[key] = t

    return QuantizedParams(
        net=net, tensors=tensors, model_id=params.model_id,
        version=params.version + 1, seed=params.seed,
        input_scheme=input_scheme, act_schemes=act_schemes,
        fallback_layers=fallback)
