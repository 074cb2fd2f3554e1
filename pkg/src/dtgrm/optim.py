"""Named trainable parameters and the Adam optimiser."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Parameter(Tensor):
    """A named leaf tensor carrying its own Adam moment state."""

    __slots__ = ("m", "v", "step")

    def __init__(self, data, name, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.dtype})"

    def astype(self, dtype):
        self.data = self.data.astype(dtype)
        self.m = self.m.astype(dtype)
        self.v = self.v.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)


def uniform_init(rng, shape, fan_in, dtype=np.float64):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def adam_step(params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Gradients are left for the caller to zero."""
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p.name!r} has no gradient")
    for p in params:
        g = p.grad
        p.step += 1
        p.m = beta1 * p.m + (1 - beta1) * g
        p.v = beta2 * p.v + (1 - beta2) * g * g
        m_hat = p.m / (1 - beta1**p.step)
        v_hat = p.v / (1 - beta2**p.step)
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype, copy=False)


def zero_grad(params):
    for p in params:
        p.grad = None
