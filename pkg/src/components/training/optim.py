from __future__ import annotations
import math
from typing import Literal, Optional, Sequence

import numpy as np

from src.components.numerics import Parameter
from src.components.training.utils import ADAM_BETAS, ADAM_EPS

Schedule = Literal["warmup_constant", "one_cycle"]


class Adam:
    """First/second-moment optimiser over a fixed parameter list.

    Parameters whose ``grad`` is ``None`` are left untouched for that step.
    """

    def __init__(self, params: Sequence[Parameter], betas: tuple[float, float] = ADAM_BETAS,
                 eps: float = ADAM_EPS):
        self.params = list(params)
        self.betas = betas
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1.0 - b1 ** self.t, 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if lr == 0.0:
                continue
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self._m], "v": [v.copy() for v in self._v]}


def learning_rate(step: int, total_steps: int, base_lr: float, schedule: Schedule = "warmup_constant",
                  warmup_steps: int = 0, final_div: float = 1e4) -> float:
    """Learning rate for 0-based ``step``.

    ``warmup_constant`` ramps linearly to ``base_lr`` over ``warmup_steps``
    then holds. ``one_cycle`` ramps up the same way then anneals with a
    cosine to ``base_lr / final_div`` at the last step.
    """
    if base_lr == 0.0:
        return 0.0
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    if schedule == "warmup_constant":
        return base_lr
    if schedule == "one_cycle":
        span = max(total_steps - warmup_steps - 1, 1)
        progress = min(max(step - warmup_steps, 0) / span, 1.0)
        low = base_lr / final_div
        return low + 0.5 * (base_lr - low) * (1.0 + math.cos(math.pi * progress))
    raise ValueError(f"unknown learning-rate schedule '{schedule}'")


def grad_norm(params: Sequence[Parameter]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    return math.sqrt(total)


def clip_grad_norm(params: Sequence[Parameter], max_norm: Optional[float]) -> float:
    """Scales gradients in place so their global L2 norm is at most ``max_norm``; returns the norm before clipping."""
    norm = grad_norm(params)
    if max_norm is not None and math.isfinite(norm) and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm
