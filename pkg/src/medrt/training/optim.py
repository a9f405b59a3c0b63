"""SGD-with-momentum and Adam over keyed parameter dicts."""

from __future__ import annotations

import numpy as np


class SGDMomentum:
    def __init__(self, momentum: float = 0.9):
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, weights: dict, grads: dict, lr: float) -> None:
        for key, g in grads.items():
            v = self.velocity.get(key)
            v = g.copy() if v is None else self.momentum * v + g
            self.velocity[key] = v
            weights[key] -= lr * v


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, weights: dict, grads: dict, lr: float) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for key, g in grads.items():
            m = self.m.get(key, np.zeros_like(g))
            v = self.v.get(key, np.zeros_like(g))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[key] = m
            self.v[key] = v
            weights[key] -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def make_optimizer(name: str, momentum: float = 0.9):
    if name == "sgd-momentum":
        return SGDMomentum(momentum=momentum)
    if name == "adam":
        return Adam()
    raise ValueError(f"unknown optimizer {name!r}")
