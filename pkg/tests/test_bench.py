"""Benchmark harness report invariants (small-scale run)."""

import json

import pytest

from medrt.gateway import bench_run
from medrt.nn import build
from medrt.training import DatasetSpec, TrainConfig, generate_phantoms


@pytest.fixture(scope="module")
def report():
    params = build("tiny_class_net", seed=3)
    data = generate_phantoms(DatasetSpec(seed=51, count=80))
    test_set = generate_phantoms(DatasetSpec(seed=52, count=40))
    ft = TrainConfig(optimizer="adam", lr_max=5e-4, lr_min=1e-5, warmup_steps=5,
                     total_steps=50, batch_size=16, max_epochs=1, patience=2,
                     loss="ce", seed=3, augment=False)
    return bench_run(params, data, test_set, devices=("measured", "edge", "server"),
                     warmup=3, iters=20, finetune_cfg=ft)


def test_rows_cover_variant_device_grid(report):
    names = {(r.name, r.device) for r in report.rows}
    for variant in ("f32-baseline", "int8", "pruned50", "pruned50-int8"):
        for device in ("measured", "edge", "server"):
            assert (variant, device) in names


def test_rows_sorted_by_mean_latency(report):
    means = [r.latency.mean_ms for r in report.rows]
    assert means == sorted(means)


def test_fps_identity_every_row(report):
    for r in report.rows:
        assert r.latency.fps * r.latency.mean_ms == pytest.approx(1000.0, rel=5e-3)


def test_pruned_int8_dominates_f32_on_cost_model(report):
    def row(name, device):
        return next(r for r in report.rows if r.name == name and r.device == device)
    f32_edge = row("f32-baseline", "edge")
    small_edge = row("pruned50-int8", "edge")
    assert small_edge.macs < f32_edge.macs
    assert small_edge.latency.mean_ms < f32_edge.latency.mean_ms
    assert row("int8", "edge").param_bytes <= 0.30 * f32_edge.param_bytes


def test_formats_are_mutually_consistent(report):
    doc = json.loads(report.to_json_bytes())
    csv_lines = report.to_csv().strip().splitlines()
    table = report.text_table()
    assert len(doc["rows"]) == len(report.rows) == len(csv_lines) - 1
    for row in report.rows:
        assert row.name in table
    first = doc["rows"][0]
    assert first["name"] == report.rows[0].name
    assert csv_lines[1].startswith(report.rows[0].name)
