"""Adam and SGD-with-momentum over Parameter lists.

The Adam learning rate follows a stepped decay: effective rate is
``base * decay ** floor(step / decay_interval)``.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter
from .errors import NonFiniteError


def _check_finite(params):
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(f"non-finite gradient in parameter {p.name!r}; step aborted")


class Adam:
    """Standard Adam with bias correction and stepped learning-rate decay."""

    def __init__(self, params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8,
                 decay=0.9, decay_interval=4000):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.decay = decay
        self.decay_interval = decay_interval
        self.step_count = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def effective_lr(self, step_count=None) -> float:
        step = self.step_count if step_count is None else step_count
        return self.lr * self.decay ** (step // self.decay_interval)

    def step(self):
        _check_finite(self.params)
        self.step_count += 1
        lr = self.effective_lr()
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            m_hat = m / bc1
            v_hat = v / bc2
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGDMomentum:
    """Momentum SGD: v <- momentum * v + g; theta <- theta - lr * v."""

    def __init__(self, params, lr=1e-3, momentum=0.9):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        _check_finite(self.params)
        for p, v in zip(self.params, self._velocity):
            v *= self.momentum
            v += p.grad
            p.value -= self.lr * v
