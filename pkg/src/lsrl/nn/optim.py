"""In-place SGD and Adam updates over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check(params: dict, grads: dict) -> None:
    if params.keys() != grads.keys():
        raise ValueError("parameter and gradient names differ")
    for name, p in params.items():
        if p.shape != grads[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}: {p.shape} vs {grads[name].shape}")


@dataclass
class SGD:
    learning_rate: float = 0.01

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        _check(params, grads)
        for name, p in params.items():
            p -= self.learning_rate * grads[name]


@dataclass
class Adam:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        _check(params, grads)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def sgd_step(params, grads, state: SGD) -> None:
    state.step(params, grads)


def adam_step(params, grads, state: Adam) -> None:
    state.step(params, grads)


def make_optimizer(name: str, learning_rate: float):
    if name == "sgd":
        return SGD(learning_rate)
    if name == "adam":
        return Adam(learning_rate)
    raise ValueError(f"unknown optimizer {name!r}")
