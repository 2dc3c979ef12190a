"""Layer objects holding parameters, cached activations and gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from lsrl.nn import functional as F


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class. Parametric layers fill ``params`` and ``grads`` with equal keys."""

    kind = "layer"

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None) -> None:
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": glorot_uniform(rng, (n_out, n_in), n_in, n_out),
            "bias": np.zeros(n_out),
        }
        self._x: np.ndarray | None = None

    def forward(self, x):
        self._x = x
        return F.dense_forward(self.params["weight"], self.params["bias"], x)

    def backward(self, dy):
        dx, dw, db = F.dense_backward(self.params["weight"], self._x, dy)
        self.grads = {"weight": dw, "bias": db}
        return dx

    def describe(self):
        return {"kind": self.kind, "in": self.n_in, "out": self.n_out}


class Conv2d(Layer):
    kind = "conv"

    def __init__(self, c_in, c_out, k, stride=1, pad=0, rng=None) -> None:
        super().__init__()
        self.c_in, self.c_out, self.k, self.stride, self.pad = c_in, c_out, k, stride, pad
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": glorot_uniform(rng, (c_out, c_in, k, k), c_in * k * k, c_out * k * k),
            "bias": np.zeros(c_out),
        }
        self._cache = None

    def forward(self, x):
        y, cols = F.conv2d_forward(self.params["weight"], self.params["bias"], x, self.stride, self.pad)
        self._cache = (x.shape, cols)
        return y

    def backward(self, dy):
        x_shape, cols = self._cache
        dx, dw, db = F.conv2d_backward(self.params["weight"], x_shape, cols, dy, self.stride, self.pad)
        self.grads = {"weight": dw, "bias": db}
        return dx

    def describe(self):
        return {"kind": self.kind, "in": self.c_in, "out": self.c_out, "k": self.k,
                "stride": self.stride, "pad": self.pad}


class ConvTranspose2d(Layer):
    kind = "tconv"

    def __init__(self, c_in, c_out, k, stride=1, pad=0, rng=None) -> None:
        super().__init__()
        self.c_in, self.c_out, self.k, self.stride, self.pad = c_in, c_out, k, stride, pad
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weight": glorot_uniform(rng, (c_in, c_out, k, k), c_in * k * k, c_out * k * k),
            "bias": np.zeros(c_out),
        }
        self._x = None

    def forward(self, x):
        self._x = x
        return F.tconv2d_forward(self.params["weight"], self.params["bias"], x, self.stride, self.pad)

    def backward(self, dy):
        dx, dw, db = F.tconv2d_backward(self.params["weight"], self._x, dy, self.stride, self.pad)
        self.grads = {"weight": dw, "bias": db}
        return dx

    def describe(self):
        return {"kind": self.kind, "in": self.c_in, "out": self.c_out, "k": self.k,
                "stride": self.stride, "pad": self.pad}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._x = x
        return F.relu(x)

    def backward(self, dy):
        return F.relu_backward(self._x, dy)


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope: float = 0.2) -> None:
        super().__init__()
        self.slope = slope

    def forward(self, x):
        self._x = x
        return F.leaky_relu(x, self.slope)

    def backward(self, dy):
        return F.leaky_relu_backward(self._x, dy, self.slope)

    def describe(self):
        return {"kind": self.kind, "slope": self.slope}


@dataclass
class Sequential:
    layers: list[Layer] = field(default_factory=list)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def named_params(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{i}.{name}", p

    def named_grads(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{i}.{name}", layer.grads[name]

    def state_dict(self) -> dict[str, np.ndarray]:
        return dict(self.named_params())

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_dict()
        if set(own) != set(state):
            raise ValueError("parameter names do not match this network")
        for name, p in own.items():
            if p.shape != state[name].shape:
                raise ValueError(f"shape mismatch for {name}: {p.shape} vs {state[name].shape}")
            p[...] = state[name]

    def zero_params(self) -> None:
        for _, p in self.named_params():
            p[...] = 0.0

    def describe(self) -> list[dict]:
        return [layer.describe() for layer in self.layers]
