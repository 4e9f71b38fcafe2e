from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.components.errors import CostCounterOverflow, ShapeError
from src.components.numerics.tensor import (
    Tensor, _sigmoid, concat, cos, index_add, sin, tanh,
)
from src.components.numerics.utils import GELU_COEFF, LAYER_NORM_EPS, MAX_COUNTER_VALUE

# ---------------------------------------------------------------------------
# Activations and normalisation
# ---------------------------------------------------------------------------


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of GELU, composed from primitives."""
    inner = (x + x * x * x * GELU_COEFF) * math.sqrt(2.0 / math.pi)
    return x * (tanh(inner) + 1.0) * 0.5


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return ((g - (g * out).sum(axis=axis, keepdims=True)) * out,)
    return Tensor.from_op(out, (x,), backward, "softmax")


def log_sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.minimum(d, 0.0) - np.log1p(np.exp(-np.abs(d)))
    return Tensor.from_op(out, (x,), lambda g: (g * (1.0 - _sigmoid(d)),), "log_sigmoid")


def layer_norm(x: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis (no affine part)."""
    d = x.data
    mu = d.mean(axis=-1, keepdims=True)
    centered = d - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def backward(g):
        n = d.shape[-1]
        gx = inv / n * (n * g - g.sum(axis=-1, keepdims=True)
                        - xhat * (g * xhat).sum(axis=-1, keepdims=True))
        return (gx,)
    return Tensor.from_op(xhat, (x,), backward, "layer_norm")


# ---------------------------------------------------------------------------
# Convolution (channels-last)
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D convolution on ``(B, H, W, Cin)`` with weight ``(kh, kw, Cin, Cout)``."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-D input and weight, got {x.shape} and {weight.shape}")
    B, H, W, cin = x.shape
    kh, kw, wcin, cout = weight.shape
    if cin != wcin:
        raise ShapeError(f"conv2d: input has {cin} channels, weight expects {wcin}")
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    if Ho <= 0 or Wo <= 0:
        raise ShapeError(f"conv2d: input {H}x{W} too small for kernel {kh}x{kw}")
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    w = weight.data

    def window(i: int, j: int):
        return (slice(None), slice(i, i + stride * (Ho - 1) + 1, stride),
                slice(j, j + stride * (Wo - 1) + 1, stride), slice(None))

    out = np.zeros((B, Ho, Wo, cout), dtype=np.result_type(x.dtype, weight.dtype))
    for i in range(kh):
        for j in range(kw):
            out += xp[window(i, j)] @ w[i, j]
    if bias is not None:
        out += bias.data

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(w)
        for i in range(kh):
            for j in range(kw):
                sl = window(i, j)
                gxp[sl] += g @ w[i, j].T
                gw[i, j] = np.tensordot(xp[sl], g, axes=([0, 1, 2], [0, 1, 2]))
        gx = gxp[:, padding:padding + H, padding:padding + W, :]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1, 2)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d")


# ---------------------------------------------------------------------------
# Bilinear sampling
# ---------------------------------------------------------------------------

def bilinear_sample_batched(maps: Tensor, points: Tensor) -> Tensor:
    """Sample ``maps`` ``(B, H, W, C)`` at ``points`` ``(B, P, 2)`` given as (x, y).

    Coordinates are pixel units with pixel centres on integers and are
    clamped to the map border.
    """
    if maps.ndim != 4 or points.ndim != 3 or points.shape[-1] != 2:
        raise ShapeError(f"bilinear_sample: bad shapes map {maps.shape}, points {points.shape}")
    if maps.shape[0] != points.shape[0]:
        raise ShapeError(f"bilinear_sample: batch {maps.shape[0]} != {points.shape[0]}")
    B, H, W, C = maps.shape
    P = points.shape[1]
    px, py = points.data[..., 0], points.data[..., 1]
    xc = np.clip(px, 0.0, W - 1)
    yc = np.clip(py, 0.0, H - 1)
    x0 = np.floor(xc).astype(np.int64)
    y0 = np.floor(yc).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (xc - x0)[..., None]
    fy = (yc - y0)[..., None]
    b = np.broadcast_to(np.arange(B)[:, None], (B, P))
    m = maps.data
    v00, v01 = m[b, y0, x0], m[b, y0, x1]
    v10, v11 = m[b, y1, x0], m[b, y1, x1]
    w00, w01 = (1 - fx) * (1 - fy), fx * (1 - fy)
    w10, w11 = (1 - fx) * fy, fx * fy
    out = w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11

    def backward(g):
        gmap = None
        if maps.requires_grad:
            flat = lambda yy, xx: (b * H + yy) * W + xx
            index = np.concatenate([flat(y0, x0), flat(y0, x1), flat(y1, x0), flat(y1, x1)], 1)
            values = np.concatenate([g * w00, g * w01, g * w10, g * w11], 1)
            gmap = index_add(B * H * W, index, values).reshape(m.shape)
        gpts = None
        if points.requires_grad:
            inside_x = (px >= 0) & (px <= W - 1)
            inside_y = (py >= 0) & (py <= H - 1)
            dx = ((1 - fy) * (v01 - v00) + fy * (v11 - v10)) * g
            dy = ((1 - fx) * (v10 - v00) + fx * (v11 - v01)) * g
            gpts = np.stack([dx.sum(-1) * inside_x, dy.sum(-1) * inside_y], axis=-1)
        return gmap, gpts
    return Tensor.from_op(out, (maps, points), backward, "bilinear_sample")


def bilinear_sample(feature_map: Tensor, points: Tensor) -> Tensor:
    """Single-map form: ``(H, W, C)`` sampled at ``(P, 2)`` gives ``(P, C)``."""
    H, W, C = feature_map.shape
    out = bilinear_sample_batched(feature_map.reshape(1, H, W, C),
                                  points.reshape(1, points.shape[0], 2))
    return out.reshape(points.shape[0], C)


# ---------------------------------------------------------------------------
# Sinusoidal embedding
# ---------------------------------------------------------------------------

def sinusoidal_embedding(x: Tensor, n_freqs: int, scale: float = math.pi) -> Tensor:
    """``[x, sin(f_k x), cos(f_k x)]`` with ``f_k = scale * 2**k``; width ``d*(2n+1)``."""
    freqs = Tensor(scale * 2.0 ** np.arange(n_freqs), dtype=x.dtype)
    lead = x.shape[:-1]
    d = x.shape[-1]
    xf = x.reshape(*lead, d, 1) * freqs
    flat = (*lead, d * n_freqs)
    return concat([x, sin(xf).reshape(flat), cos(xf).reshape(flat)], axis=-1)


def embedding_width(n_inputs: int, n_freqs: int) -> int:
    return n_inputs * (2 * n_freqs + 1)


# ---------------------------------------------------------------------------
# Multi-head attention with score-pair accounting
# ---------------------------------------------------------------------------

@dataclass
class AttentionCounter:
    """Counts query-key score pairs; heads are not multiplied in.

    With ``dry_run`` set the attention kernel only counts and returns zeros.
    """
    dry_run: bool = False
    limit: int = MAX_COUNTER_VALUE
    total: int = 0
    by_tag: dict[str, int] = field(default_factory=dict)

    def add(self, tag: str, pairs: int) -> None:
        pairs = int(pairs)
        if self.total + pairs > self.limit:
            raise CostCounterOverflow(
                f"attention counter overflow at tag '{tag}': {self.total} + {pairs} > {self.limit}")
        self.total += pairs
        self.by_tag[tag] = self.by_tag.get(tag, 0) + pairs

    def count(self, *tags: str) -> int:
        return sum(self.by_tag.get(t, 0) for t in tags)

    def reset(self) -> None:
        self.total = 0
        self.by_tag.clear()

    def to_dict(self):
        return {"total": self.total, "by_tag": dict(sorted(self.by_tag.items()))}


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, n_heads: int,
                         bias: Optional[Tensor] = None,
                         counter: Optional[AttentionCounter] = None,
                         tag: str = "attention",
                         return_weights: bool = False):
    """Scaled dot-product attention over the last two axes.

    ``q`` is ``(..., Lq, D)``, ``k`` ``(..., Lk, D)``, ``v`` ``(..., Lk, Dv)``.
    ``bias`` must broadcast to ``(..., heads, Lq, Lk)``.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"attention: query width {q.shape[-1]} != key width {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"attention: {k.shape[-2]} keys but {v.shape[-2]} values")
    D, Dv = q.shape[-1], v.shape[-1]
    if D % n_heads or Dv % n_heads:
        raise ShapeError(f"attention: widths {D}/{Dv} not divisible by {n_heads} heads")
    batch = np.broadcast_shapes(q.shape[:-2], k.shape[:-2], v.shape[:-2])
    Lq, Lk = q.shape[-2], k.shape[-2]
    if counter is not None:
        counter.add(tag, int(np.prod(batch, dtype=np.int64)) * Lq * Lk)
        if counter.dry_run:
            out = Tensor(np.zeros((*batch, Lq, Dv), dtype=q.dtype))
            return (out, None) if return_weights else out

    dh, dvh = D // n_heads, Dv // n_heads

    def split(t: Tensor, width: int) -> Tensor:
        return t.reshape(*t.shape[:-1], n_heads, width).swapaxes(-2, -3)

    qh, kh, vh = split(q, dh), split(k, dh), split(v, dvh)
    scores = (qh @ kh.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
    if bias is not None:
        scores = scores + bias
    weights = softmax(scores, axis=-1)
    out = (weights @ vh).swapaxes(-2, -3)
    out = out.reshape(*out.shape[:-2], Dv)
    if return_weights:
        return out, weights
    return out
