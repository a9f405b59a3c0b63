"""Benchmark harness: accuracy/latency tradeoffs across compression configs.

For each model variant (f32 baseline, int8 PTQ, 50% structured pruning with
fine-tuning, pruned+int8) the harness measures host latency (monotonic
clock, warmup discarded, batch 1) and/or estimates latency on device cost
profiles, then emits JSON, CSV, and an aligned text table with rows sorted
by mean latency.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from medrt.errors import ConfigurationError
from medrt.compress.cost import DEVICE_PROFILES, estimate_cost
from medrt.compress.prune import prune_structured
from medrt.compress.quant import quantize_model
from medrt.jsonutil import canonical_json
from medrt.metrics.latency import LatencySummary, latency_summary
from medrt.nn.network import forward
from medrt.nn.params import Params
from medrt.nn.tensor import Tensor
from medrt.training.trainer import TrainConfig, batch_arrays, evaluate, train

VARIANTS = ("f32-baseline", "int8", "pruned50", "pruned50-int8")


@dataclass(frozen=True)
class BenchRow:
    name: str
    precision: str
    prune_fraction: float
    device: str                      # measured | edge | server | cloud
    accuracy: float
    latency: LatencySummary
    macs: int
    param_bytes: int

    def to_json(self) -> dict:
        return {"name": self.name, "precision": self.precision,
                "prune_fraction": self.prune_fraction, "device": self.device,
                "accuracy": self.accuracy, "latency": self.latency.to_json(),
                "fps": self.latency.fps, "macs": self.macs,
                "param_bytes": self.param_bytes}


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]  # sorted by mean latency ascending

    def to_json_bytes(self) -> bytes:
        return canonical_json({"rows": [r.to_json() for r in self.rows]})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["name", "precision", "prune_fraction", "device", "accuracy",
                    "mean_ms", "p50_ms", "p95_ms", "p99_ms", "fps", "macs",
                    "param_bytes"])
        for r in self.rows:
            w.writerow([r.name, r.precision, r.prune_fraction, r.device,
                        f"{r.accuracy:.4f}", f"{r.latency.mean_ms:.4f}",
                        f"{r.latency.p50_ms:.4f}", f"{r.latency.p95_ms:.4f}",
                        f"{r.latency.p99_ms:.4f}", f"{r.latency.fps:.4f}",
                        r.macs, r.param_bytes])
        return buf.getvalue()

    def text_table(self) -> str:
        head = (f"{'Config':<24} {'Device':<9} {'Accuracy':>9} {'Mean ms':>9} "
                f"{'p99 ms':>9} {'FPS':>7} {'MMACs':>7}")
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.name:<24} {r.device:<9} {r.accuracy:>9.4f} "
                         f"{r.latency.mean_ms:>9.3f} {r.latency.p99_ms:>9.3f} "
                         f"{r.latency.fps:>7.1f} {r.macs / 1e6:>7.2f}")
        return "\n".join(lines)


def prepare_variants(params: Params, dataset, seed: int = 0,
                     finetune_cfg: TrainConfig | None = None,
                     calib_count: int = 32, variants=VARIANTS) -> dict:
    """Builds the benchmark model variants from trained f32 Params."""
    if params.precision != "f32":
        raise ConfigurationError("bench needs trained f32 Params")
    calib = [batch_arrays([s])[0] for s in dataset[:calib_count]]
    out = {}
    if "f32-baseline" in variants:
        out["f32-baseline"] = (params, 0.0)
    if "int8" in variants:
        out["int8"] = (quantize_model(params, calib), 0.0)
    pruned = None
    if "pruned50" in variants or "pruned50-int8" in variants:
        net2, p2, _plan = prune_structured(params.net, params, 0.5)
        cfg = finetune_cfg or TrainConfig(optimizer="adam", lr_max=5e-4, lr_min=1e-5,
                                          warmup_steps=10, total_steps=400,
                                          batch_size=16, max_epochs=2, patience=3,
                                          loss="ce", seed=seed, augment=False)
        pruned, _hist = train(net2, dataset, cfg, params=p2)
        out["pruned50"] = (pruned, 0.5)
    if "pruned50-int8" in variants:
        out["pruned50-int8"] = (quantize_model(pruned, calib), 0.5)
    return out


def measure_latency(params: Params, inputs, warmup: int = 100,
                    iters: int = 1000) -> LatencySummary:
    """Single-image forward latency on this host; warmup runs discarded."""
    xs = [Tensor(np.ascontiguousarray(x)) for x in inputs]
    n = len(xs)
    for i in range(warmup):
        forward(params.net, params, xs[i % n], params.precision)
    times = []
    for i in range(iters):
        x = xs[i % n]
        t0 = time.perf_counter()
        forward(params.net, params, x, params.precision)
        times.append((time.perf_counter() - t0) * 1000.0)
    return latency_summary(times)


def bench_run(params: Params, dataset, test_set,
              devices=("measured", "edge", "server", "cloud"),
              variants=VARIANTS, warmup: int = 100, iters: int = 1000,
              seed: int = 0, finetune_cfg: TrainConfig | None = None) -> BenchReport:
    if not test_set:
        raise ConfigurationError("bench needs a phantom test set")
    built = prepare_variants(params, dataset, seed=seed, finetune_cfg=finetune_cfg,
                             variants=variants)
    eval_cfg = TrainConfig(loss="ce", seed=seed)
    inputs = [batch_arrays([s])[0] for s in test_set[:64]]
    rows = []
    for name, (variant, fraction) in built.items():
        _, accuracy = evaluate(variant.net, variant, eval_cfg, list(test_set))
        macs = estimate_cost(variant.net, "f32", "edge").total_macs
        pbytes = variant.param_bytes()
        for device in devices:
            if device == "measured":
                lat = measure_latency(variant, inputs, warmup=warmup, iters=iters)
            else:
                report = estimate_cost(variant.net, variant.precision,
                                       DEVICE_PROFILES[device])
                est = report.latency_ms
                lat = latency_summary([est])
            rows.append(BenchRow(name=name, precision=variant.precision,
                                 prune_fraction=fraction, device=device,
                                 accuracy=accuracy, latency=lat, macs=macs,
                                 param_bytes=pbytes))
    rows.sort(key=lambda r: (r.latency.mean_ms, r.name, r.device))
    return BenchReport(rows=tuple(rows))
