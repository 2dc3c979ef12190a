"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from lsrl.nn.layers import Layer, Sequential


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def numeric_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def grad_check(
    f: Callable[[], float],
    arrays: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between ``analytic`` grads and central differences of ``f``."""
    worst = 0.0
    for name, x in arrays.items():
        worst = max(worst, relative_error(analytic[name], numeric_gradient(f, x, eps)))
    return worst


def check_module(
    module: Layer | Sequential,
    x: np.ndarray,
    rng: np.random.Generator,
    eps: float = 1e-5,
) -> float:
    """Gradient-check a layer or network under a random linear probe loss.

    Covers the input gradient and every parameter gradient.
    """
    x = x.copy()
    probe = rng.standard_normal(module.forward(x).shape)

    def loss() -> float:
        return float((module.forward(x) * probe).sum())

    module.forward(x)
    dx = module.backward(probe)
    if isinstance(module, Sequential):
        params = module.state_dict()
        grads = {k: v.copy() for k, v in module.named_grads()}
    else:
        params = module.params
        grads = {k: v.copy() for k, v in module.grads.items()}
    arrays = {"input": x, **params}
    analytic = {"input": dx, **grads}
    return grad_check(loss, arrays, analytic, eps)
