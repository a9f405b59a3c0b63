"""Stratified k-fold splitting and cross-validated training."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from medrt.errors import ConfigurationError
from medrt.nn.network import NetworkSpec
from medrt.training.trainer import TrainConfig, evaluate, train


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: tuple[int, ...]  # fold index per sample
    labels: tuple

    def fold_indices(self, fold: int):
        return [i for i, f in enumerate(self.assignment) if f == fold]


def kfold_split(n: int, k: int, labels, seed: int = 0) -> FoldPlan:
    """Stratified round-robin dealing; per-fold class counts differ by <= 1."""
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if n < k:
        raise ConfigurationError(f"need n >= k, got n={n} k={k}")
    labels = list(labels)
    if len(labels) != n:
        raise ConfigurationError(f"{len(labels)} labels for {n} samples")
    rng = np.random.default_rng(seed)
    assignment = [0] * n
    next_fold = 0
    for cls in sorted(set(labels), key=str):
        members = [i for i, l in enumerate(labels) if l == cls]
        if len(members) < k:
            warnings.warn(
                f"class {cls!r} has {len(members)} members for {k} folds; "
                "falling back to unstratified dealing for it", RuntimeWarning)
        members = [members[i] for i in rng.permutation(len(members))]
        for i in members:
            assignment[i] = next_fold
            next_fold = (next_fold + 1) % k
    return FoldPlan(k=k, assignment=tuple(assignment), labels=tuple(labels))


def run_cv(net: NetworkSpec, dataset, plan: FoldPlan, config: TrainConfig):
    """Trains k models, each validated on its held-out fold."""
    if len(dataset) != len(plan.assignment):
        raise ConfigurationError("plan does not cover this dataset")
    folds = []
    for fold in range(plan.k):
        held = [dataset[i] for i in plan.fold_indices(fold)]
        rest = [dataset[i] for i in range(len(dataset)) if plan.assignment[i] != fold]
        fold_cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + fold})
        params, history = train(net, rest, fold_cfg)
        loss, metric = evaluate(net, params, config, held)
        folds.append({"fold": fold, "val_loss": loss, "val_metric": metric,
                      "epochs": len(history)})
    mean_metric = float(np.mean([f["val_metric"] for f in folds]))
    mean_loss = float(np.mean([f["val_loss"] for f in folds]))
    return {"folds": folds, "mean_metric": mean_metric, "mean_loss": mean_loss}
