"""Adam optimizer over :class:`~stainlab.autodiff.tensor.Parameter` lists.

Moment buffers live on the parameters themselves so checkpoints can carry
optimizer state without a parallel registry.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .tensor import Parameter


def adam_step(
    p: Parameter,
    lr: float,
    beta1: float = 0.5,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update in place.  No-op when grad is unset."""
    if p.grad is None:
        return
    g = p.grad
    p.steps += 1
    p.m = beta1 * p.m + (1.0 - beta1) * g
    p.v = beta2 * p.v + (1.0 - beta2) * (g * g)
    m_hat = p.m / (1.0 - beta1**p.steps)
    v_hat = p.v / (1.0 - beta2**p.steps)
    p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 2e-4,
        betas: tuple[float, float] = (0.5, 0.999),
        eps: float = 1e-8,
    ):
        params = list(params)
        if not params:
            raise InvalidArgumentError("Adam needs at least one parameter")
        if lr <= 0:
            raise InvalidArgumentError("learning rate must be positive")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise InvalidArgumentError("betas must lie in [0, 1)")
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps

    def step(self):
        for p in self.params:
            adam_step(p, self.lr, self.betas[0], self.betas[1], self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
