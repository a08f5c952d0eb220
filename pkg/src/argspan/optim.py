"""Adam-style optimizer with decoupled weight decay, warmup and clipping."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class LinearSchedule:
    """Linear warmup to ``base_lr`` then linear decay to zero.

    Step numbering is 1-based: ``lr(t) = base * t / W`` for ``t <= W`` and
    ``base * (T - t) / (T - W)`` afterwards, with W = round(warmup_frac*T)
    (at least 1).
    """

    def __init__(self, base_lr: float, total_steps: int, warmup_frac: float = 0.1):
        if total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 0.0 <= warmup_frac < 1.0:
            raise ValueError("warmup_frac must be in [0, 1)")
        self.base_lr = base_lr
        self.total_steps = total_steps
        self.warmup_steps = max(1, round(warmup_frac * total_steps))

    def lr(self, step: int) -> float:
        if step <= self.warmup_steps:
            return self.base_lr * step / self.warmup_steps
        span = max(1, self.total_steps - self.warmup_steps)
        return self.base_lr * max(0.0, (self.total_steps - step) / span)


def global_grad_norm(params: dict[str, Tensor]) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most ``max_norm``.

    Returns the pre-clip norm.
    """
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor
    return norm


class AdamW:
    """Adam with bias correction and decoupled weight decay.

    Weight decay is applied only to matrices (ndim >= 2); biases, gains
    and the selector vectors are left undecayed, following common
    transformer practice.  With learning rate 0 a step changes nothing.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        schedule: LinearSchedule,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = params
        self.schedule = schedule
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> float:
        """Apply one update using current gradients; returns the lr used."""
        self.step_count += 1
        lr = self.schedule.lr(self.step_count)
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and p.data.ndim >= 2:
                update = update + self.weight_decay * p.data
            p.data -= (lr * update).astype(p.data.dtype)
        return lr
