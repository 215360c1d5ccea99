"""Composite ops and parameter-holding layers built on the primitives."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterator

import numpy as np

from ovavss.errors import ConfigurationError, DimensionError
from ovavss.numcore import ops
from ovavss.numcore.random import default_generator, xavier_uniform
from ovavss.numcore.tensor import Tensor, as_tensor


class Parameter(Tensor):
    """A trainable leaf tensor owned by a Module."""

    def __init__(self, data, requires_grad: bool = True):
        super().__init__(data, requires_grad=requires_grad)


class Module:
    """Container of Parameters and sub-Modules, walked in attribute order."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            yield from _walk(value, f"{prefix}{name}")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        if missing:
            raise ConfigurationError(f"state is missing parameters: {missing[:5]}")
        for name, p in own.items():
            if state[name].shape != p.shape:
                raise DimensionError(f"load {name}", p.shape, state[name].shape)
            p.data = np.ascontiguousarray(state[name], dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self


def _walk(value, name: str):
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")


def layer_norm(x, gamma=None, beta=None, eps: float = 1e-5) -> Tensor:
    x = as_tensor(x)
    centered = x - ops.mean(x, axis=-1, keepdims=True)
    var = ops.mean(centered * centered, axis=-1, keepdims=True)
    out = centered * ops.power(var + eps, -0.5)
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def group_norm(x, groups: int, gamma=None, beta=None, eps: float = 1e-5) -> Tensor:
    """Group normalization of a (B, C, H, W) tensor."""
    x = as_tensor(x)
    b, c, h, w = x.shape
    if c % groups:
        raise ConfigurationError(f"group_norm: {c} channels not divisible by {groups} groups")
    g = x.reshape(b, groups, c // groups, h, w)
    centered = g - ops.mean(g, axis=(2, 3, 4), keepdims=True)
    var = ops.mean(centered * centered, axis=(2, 3, 4), keepdims=True)
    out = (centered * ops.power(var + eps, -0.5)).reshape(b, c, h, w)
    if gamma is not None:
        out = out * gamma.reshape(1, c, 1, 1)
    if beta is not None:
        out = out + beta.reshape(1, c, 1, 1)
    return out


@lru_cache(maxsize=64)
def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) linear interpolation weights, half-pixel centres."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = max((i + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[i, i0] += 1.0 - frac
        m[i, i1] += frac
    m.setflags(write=False)
    return m


def resize_bilinear(x, size: tuple[int, int]) -> Tensor:
    """Bilinear resize over the last two axes."""
    x = as_tensor(x)
    ry = interp_matrix(x.shape[-2], size[0])
    rx = interp_matrix(x.shape[-1], size[1])
    return ops.matmul(ops.matmul(Tensor(ry), x), Tensor(rx.T))


def bilinear_upsample(x, factor: int = 2) -> Tensor:
    x = as_tensor(x)
    return resize_bilinear(x, (x.shape[-2] * factor, x.shape[-1] * factor))


def resize_array(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """numpy twin of resize_bilinear for data that never needs gradients."""
    ry = interp_matrix(arr.shape[-2], size[0])
    rx = interp_matrix(arr.shape[-1], size[1])
    return ry @ np.asarray(arr, dtype=np.float64) @ rx.T


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None, bias: bool = True):
        rng = rng or default_generator()
        self.weight = Parameter(xavier_uniform(in_dim, out_dim, (in_dim, out_dim), rng))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None

    def forward(self, x) -> Tensor:
        out = ops.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1, rng: np.random.Generator | None = None):
        rng = rng or default_generator()
        fan_in, fan_out = in_ch * kernel * kernel, out_ch * kernel * kernel
        self.weight = Parameter(xavier_uniform(fan_in, fan_out, (out_ch, in_ch, kernel, kernel), rng))
        self.bias = Parameter(np.zeros(out_ch))
        self.stride = stride

    def forward(self, x) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int):
        if groups < 1 or channels % groups:
            raise ConfigurationError(f"GroupNorm: {channels} channels not divisible by {groups} groups")
        self.groups = groups
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))

    def forward(self, x) -> Tensor:
        return group_norm(x, self.groups, self.gamma, self.beta)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))

    def forward(self, x) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


class MLP(Module):
    """Stack of Linear layers with an activation between (not after) them."""

    def __init__(self, dims: list[int], rng: np.random.Generator | None = None, activation: str = "relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = ops.relu if activation == "relu" else ops.gelu

    def forward(self, x) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activation(x)
        return x


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator | None = None):
        if dim % heads:
            raise ConfigurationError(f"attention dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)

    def forward(self, q, k, v, attn_bias: np.ndarray | None = None) -> Tensor:
        return multi_head_attention(q, k, v, self.heads, self, attn_bias)


def multi_head_attention(q, k, v, heads: int, params: MultiHeadAttention, attn_bias: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over (L, C) or (B, L, C) inputs.

    `attn_bias` is an additive constant broadcast against the (B, heads, L_q, L_k)
    score tensor; large negative entries mask keys out.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    dim = q.shape[-1]
    if dim % heads:
        raise ConfigurationError(f"attention dim {dim} not divisible by {heads} heads")
    if k.shape[-1] != dim or v.shape[-1] != dim or k.shape[-2] != v.shape[-2]:
        raise DimensionError("attention", k.shape, v.shape)
    squeeze = q.ndim == 2
    if squeeze:
        q, k, v = q.reshape(1, *q.shape), k.reshape(1, *k.shape), v.reshape(1, *v.shape)
    batch, lq, lk = q.shape[0], q.shape[1], k.shape[1]
    dk = dim // heads

    def split(x: Tensor, length: int) -> Tensor:
        return x.reshape(batch, length, heads, dk).permute(0, 2, 1, 3)

    qh = split(params.q_proj(q), lq)
    kh = split(params.k_proj(k), lk)
    vh = split(params.v_proj(v), lk)
    scores = ops.matmul(qh, kh.mT) * (1.0 / math.sqrt(dk))
    if attn_bias is not None:
        scores = scores + attn_bias
    weights = ops.softmax(scores, axis=-1)
    out = ops.matmul(weights, vh).permute(0, 2, 1, 3).reshape(batch, lq, dim)
    out = params.out_proj(out)
    return out.reshape(lq, dim) if squeeze else out
