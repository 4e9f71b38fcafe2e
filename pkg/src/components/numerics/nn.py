from __future__ import annotations
import math
from typing import Iterator, Literal, Optional

import numpy as np

from src.components.errors import ShapeError
from src.components.numerics.ops import (
    AttentionCounter, conv2d, gelu, layer_norm, multi_head_attention,
)
from src.components.numerics.tensor import Parameter, Tensor, relu

Activation = Literal["relu", "gelu"]


def activate(x: Tensor, name: Activation) -> Tensor:
    if name == "gelu":
        return gelu(x)
    if name == "relu":
        return relu(x)
    raise ValueError(f"unknown activation '{name}'")


class Module:
    """Container of parameters and sub-modules discovered through attributes."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            yield from _walk(f"{prefix}{name}", value)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ShapeError(f"state dict mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"parameter '{name}': expected {p.shape}, got {value.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _walk(name: str, value) -> Iterator[tuple[str, Parameter]]:
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(f"{name}.{i}", item)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        bound = 1.0 / math.sqrt(in_dim)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None
        self.in_dim, self.out_dim = in_dim, out_dim

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"Linear: expected last dim {self.in_dim}, got {x.shape}")
        lead = x.shape[:-1]
        y = x.reshape(-1, self.in_dim) @ self.weight
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(*lead, self.out_dim)

    def zero_(self) -> None:
        self.weight.data[...] = 0.0
        if self.bias is not None:
            self.bias.data[...] = 0.0


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x) * self.gamma + self.beta


class MLP(Module):
    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int,
                 rng: np.random.Generator, activation: Activation = "gelu"):
        self.fc1 = Linear(in_dim, hidden_dim, rng)
        self.fc2 = Linear(hidden_dim, out_dim, rng)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(activate(self.fc1(x), self.activation))


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0):
        bound = 1.0 / math.sqrt(kernel * kernel * in_ch)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(kernel, kernel, in_ch, out_ch)))
        self.bias = Parameter(np.zeros(out_ch))
        self.stride, self.padding = stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class MultiHeadAttention(Module):
    """Projected multi-head attention; keys/values may come from another set."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator):
        if dim % n_heads:
            raise ShapeError(f"attention width {dim} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def forward(self, x: Tensor, context: Optional[Tensor] = None,
                bias: Optional[Tensor] = None,
                counter: Optional[AttentionCounter] = None, tag: str = "attention",
                return_weights: bool = False):
        context = x if context is None else context
        if counter is not None and counter.dry_run:
            return multi_head_attention(x, context, context, self.n_heads, bias, counter, tag,
                                        return_weights)
        result = multi_head_attention(self.q(x), self.k(context), self.v(context),
                                      self.n_heads, bias, counter, tag, return_weights)
        if return_weights:
            out, weights = result
            return self.out(out), weights
        return self.out(result)
