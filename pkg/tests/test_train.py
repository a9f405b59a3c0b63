"""Training loop: memorization, determinism, early stopping."""

import numpy as np
import pytest

from medrt.nn import save_params, tiny_class_net
from medrt.training import DatasetSpec, TrainConfig, generate_phantoms, train


def _tiny_cfg(**kw):
    base = dict(optimizer="adam", lr_max=3e-3, lr_min=1e-4, warmup_steps=5,
                total_steps=300, batch_size=4, max_epochs=40, patience=50,
                loss="ce", seed=11, augment=False)
    base.update(kw)
    return TrainConfig(**base)


def test_single_sample_memorization():
    data = generate_phantoms(DatasetSpec(seed=1, count=1, lesion_prob=1.0))
    net = tiny_class_net()
    params, history = train(net, data, _tiny_cfg())
    assert history[-1]["train_loss"] < 0.01


def test_same_seed_same_final_bytes():
    data = generate_phantoms(DatasetSpec(seed=2, count=12))
    net = tiny_class_net()
    cfg = _tiny_cfg(max_epochs=2)
    p1, h1 = train(net, data, cfg)
    p2, h2 = train(net, data, cfg)
    assert save_params(p1) == save_params(p2)
    assert h1 == h2


def test_early_stopping_stops_before_max_epochs():
    data = generate_phantoms(DatasetSpec(seed=3, count=24))
    net = tiny_class_net()
    cfg = _tiny_cfg(max_epochs=30, patience=2, lr_max=1e-6, lr_min=1e-7)
    _, history = train(net, data, cfg)
    assert len(history) < 30


def test_history_records_fields():
    data = generate_phantoms(DatasetSpec(seed=4, count=8))
    net = tiny_class_net()
    _, history = train(net, data, _tiny_cfg(max_epochs=2))
    for row in history:
        assert {"epoch", "train_loss", "val_loss", "val_metric", "lr"} <= set(row)


def test_version_bumped_after_training():
    data = generate_phantoms(DatasetSpec(seed=5, count=8))
    net = tiny_class_net()
    params, _ = train(net, data, _tiny_cfg(max_epochs=1))
    assert params.version >= 2
