from __future__ import annotations
from typing import Callable, Optional, Sequence

import numpy as np

from src.components.errors import NonFiniteError, ShapeError
from src.components.numerics.tensor import Tensor, no_grad
from src.components.numerics.utils import GRAD_CHECK_EPS, GRAD_CHECK_FLOOR


def _scalar(out: Tensor) -> float:
    if not isinstance(out, Tensor) or out.size != 1:
        raise ShapeError("grad_check: function must return a scalar tensor")
    value = float(out.data.reshape(-1)[0])
    if not np.isfinite(value):
        raise NonFiniteError(f"grad_check: function value is not finite ({value})")
    return value


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor | Sequence[Tensor],
               eps: float = GRAD_CHECK_EPS, floor: float = GRAD_CHECK_FLOOR,
               n_samples: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` receives the first tensor of ``x`` and must be pure. When more
    tensors are given they are perturbed in place and ``f`` is expected to
    read them through a closure. ``n_samples`` limits the check to a random
    subset of coordinates per tensor.
    """
    tensors = [x] if isinstance(x, Tensor) else list(x)
    if not tensors:
        raise ValueError("grad_check: nothing to check")
    first = tensors[0]
    flags = [t.requires_grad for t in tensors]
    for t in tensors:
        if not t.data.flags.c_contiguous or not t.data.flags.writeable:
            t.data = np.array(t.data, copy=True)
        t.requires_grad = True
        t.grad = None
    try:
        out = f(first)
        _scalar(out)
        if out.requires_grad:
            out.backward()
        rng = rng or np.random.default_rng(0)
        worst = 0.0
        with no_grad():
            for t in tensors:
                analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
                coords = np.arange(t.size)
                if n_samples is not None and n_samples < t.size:
                    coords = rng.choice(t.size, size=n_samples, replace=False)
                flat = t.data.reshape(-1)
                for c in coords:
                    original = flat[c]
                    flat[c] = original + eps
                    plus = _scalar(f(first))
                    flat[c] = original - eps
                    minus = _scalar(f(first))
                    flat[c] = original
                    numeric = (plus - minus) / (2.0 * eps)
                    a = float(analytic.reshape(-1)[c])
                    err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
                    worst = max(worst, err)
        return worst
    finally:
        for t, flag in zip(tensors, flags):
            t.requires_grad = flag
