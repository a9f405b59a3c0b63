"""Supervised training loop with warmup-cosine LR, early stopping, and a
seeded 80/20 train/val split."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from medrt.errors import ConfigurationError, TrainingError
from medrt.imageops import normalize
from medrt.nn.network import NetworkSpec, backward, forward
from medrt.nn.params import Params
from medrt.nn.tensor import Tensor
from medrt.training.augment import augment
from medrt.training.losses import loss_bce_dice, loss_ce, loss_focal
from medrt.training.optim import make_optimizer
from medrt.training.phantoms import LESION, PhantomSample
from medrt.training.schedules import lr_at


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    warmup_steps: int = 50
    total_steps: int = 1000
    batch_size: int = 16
    max_epochs: int = 10
    patience: int = 3
    loss: str = "ce"
    loss_alpha: float = 0.5       # bce_dice mix
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    momentum: float = 0.9
    seed: int = 0
    augment: bool = True
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.lr_min > self.lr_max:
            raise ConfigurationError("lr_min must be <= lr_max")
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        if not 0 <= self.loss_alpha <= 1:
            raise ConfigurationError("loss_alpha must be in [0, 1]")
        if self.loss not in ("ce", "bce_dice", "focal"):
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigurationError("batch_size and max_epochs must be >= 1")


def batch_arrays(samples: list[PhantomSample]):
    imgs = np.stack([normalize(s.image.data[0]) for s in samples])[:, None]
    labels = np.array([1 if s.class_label == LESION else 0 for s in samples])
    masks = np.stack([s.mask for s in samples]).astype(np.float32)[:, None]
    return imgs.astype(np.float32), labels, masks


def _loss_and_grad(cfg: TrainConfig, out: np.ndarray, labels, masks):
    if cfg.loss == "ce":
        return loss_ce(out, labels)
    if cfg.loss == "bce_dice":
        return loss_bce_dice(out, masks, alpha=cfg.loss_alpha)
    return loss_focal(out, masks, alpha_f=cfg.focal_alpha, gamma=cfg.focal_gamma)


def _metric(cfg: TrainConfig, out: np.ndarray, labels, masks) -> float:
    if cfg.loss == "ce":
        return float((out.argmax(axis=1) == labels).mean())
    pred = out >= 0.5
    inter = float((pred * (masks > 0.5)).sum())
    denom = float(pred.sum() + (masks > 0.5).sum())
    return 1.0 if denom == 0 else 2 * inter / denom


def evaluate(net: NetworkSpec, params: Params, cfg: TrainConfig,
             samples: list[PhantomSample], batch_size: int = 32):
    precision = "int8" if params.precision == "int8" else "f32"
    losses, metrics, weights = [], [], []
    for i in range(0, len(samples), batch_size):
        chunk = samples[i:i + batch_size]
        imgs, labels, masks = batch_arrays(chunk)
        out, _ = forward(net, params, Tensor(imgs), precision)
        loss, _ = _loss_and_grad(cfg, out.data.astype(np.float64), labels, masks)
        losses.append(loss * len(chunk))
        metrics.append(_metric(cfg, out.data, labels, masks) * len(chunk))
        weights.append(len(chunk))
    total = sum(weights)
    return sum(losses) / total, sum(metrics) / total


def train(net: NetworkSpec, dataset: list[PhantomSample], config: TrainConfig,
          params: Params | None = None):
    """Returns (trained Params, history). Deterministic in config.seed."""
    if not dataset:
        raise ConfigurationError("dataset is empty")
    from medrt.nn.params import init_params
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(dataset))
    shuffled = [dataset[i] for i in order]
    n_val = int(config.val_fraction * len(shuffled))
    train_set = shuffled[:len(shuffled) - n_val]
    val_set = shuffled[len(shuffled) - n_val:] or train_set

    base = params if params is not None else init_params(net, net.name, seed=config.seed)
    weights = {k: t.data.astype(np.float32).copy() for k, t in base.tensors.items()}
    opt = make_optimizer(config.optimizer, momentum=config.momentum)

    def as_params(w, bump_from=base):
        return bump_from.bumped(tensors={k: Tensor(v.copy()) for k, v in w.items()})

    live = base.bumped(tensors={k: Tensor(v) for k, v in weights.items()})

    history: list[dict] = []
    best_loss = math.inf
    best_weights = {k: v.copy() for k, v in weights.items()}
    stale = 0
    step = 0
    for epoch in range(config.max_epochs):
        epoch_rng = np.random.default_rng([config.seed, epoch])
        idx = epoch_rng.permutation(len(train_set))
        epoch_losses = []
        for start in range(0, len(idx), config.batch_size):
            chunk = [train_set[i] for i in idx[start:start + config.batch_size]]
            if config.augment:
                chunk = [augment(s, epoch_rng) for s in chunk]
            imgs, labels, masks = batch_arrays(chunk)
            out, trace = forward(net, live, Tensor(imgs), "f32")
            loss, grad = _loss_and_grad(config, out.data.astype(np.float64), labels, masks)
            if not math.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch} step {step}",
                    checkpoint=as_params(best_weights), history=history)
            epoch_losses.append(loss)
            pgrads, _ = backward(net, live, trace, Tensor(grad.astype(np.float32)))
            lr = lr_at(config.lr_max, config.lr_min, config.warmup_steps,
                       config.total_steps, step)
            opt.step(weights, pgrads, lr)
            step += 1
        val_loss, val_metric = evaluate(net, live, config, val_set)
        history.append({"epoch": epoch, "train_loss": float(np.mean(epoch_losses)),
                        "val_loss": val_loss, "val_metric": val_metric,
                        "lr": lr_at(config.lr_max, config.lr_min,
                                    config.warmup_steps, config.total_steps, step)})
        if val_loss < best_loss - 1e-9:
            best_loss = val_loss
            best_weights = {k: v.copy() for k, v in weights.items()}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return as_params(best_weights), history
